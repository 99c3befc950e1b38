//! Concept categories and the fixed subcategory vocabularies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

macro_rules! subcategory_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// All variants in canonical order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                $name::parse(&s).ok_or_else(|| {
                    serde::de::Error::custom(format!("unknown {} `{s}`", stringify!($name)))
                })
            }
        }
    };
}

subcategory_enum!(
    /// The nine attribute families.
    AttributeKind {
        Color => "color",
        Material => "material",
        Texture => "texture",
        ArchitecturalStyle => "architectural_style",
        State => "state",
        Shape => "shape",
        Size => "size",
        HumanDescriptor => "human_descriptor",
        Adjective => "adjective",
    }
);

subcategory_enum!(
    /// The six relation families.
    RelationKind {
        Spatial => "spatial",
        Functional => "functional",
        Interactional => "interactional",
        Social => "social",
        Emotional => "emotional",
        Symbolic => "symbolic",
    }
);

subcategory_enum!(
    /// Scene-attribute subcategories. Declaration order is the precedence
    /// order used when scene attributes are listed in a caption.
    SceneAttrKind {
        Artist => "artist",
        Genre => "genre",
        PaintingStyle => "painting_style",
        PaintingTechnique => "painting_technique",
        CameraModel => "camera_model",
        FocalLength => "focal_length",
        Perspective => "perspective",
        Aperture => "aperture",
        DepthOfField => "depth_of_field",
        ShotScale => "shot_scale",
        Location => "location",
        Weather => "weather",
        Lighting => "lighting",
        CameraRig => "camera_rig",
        CameraMovement => "camera_movement",
        VideoEditingStyle => "video_editing_style",
        TemporalSpan => "temporal_span",
        ThreedAttribute => "threed_attribute",
    }
);

impl SceneAttrKind {
    /// Media gate applied to entries that do not declare one.
    pub fn default_media(self) -> Media {
        match self {
            SceneAttrKind::CameraRig
            | SceneAttrKind::CameraMovement
            | SceneAttrKind::VideoEditingStyle
            | SceneAttrKind::TemporalSpan => Media::Video,
            SceneAttrKind::ThreedAttribute => Media::Threed,
            _ => Media::Any,
        }
    }
}

/// Generation target of a caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Image,
    Video,
    Threed,
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "image" => Ok(Target::Image),
            "video" => Ok(Target::Video),
            "threed" | "3d" => Ok(Target::Threed),
            other => Err(Error::InvalidArgument(format!("unknown target `{other}`"))),
        }
    }
}

/// Which generation targets may sample a scene-attribute entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Media {
    Image,
    Video,
    Threed,
    Any,
}

impl Media {
    pub fn admits(self, target: Target) -> bool {
        matches!(
            (self, target),
            (Media::Any, _)
                | (Media::Image, Target::Image)
                | (Media::Video, Target::Video)
                | (Media::Threed, Target::Threed)
        )
    }
}

/// Top-level element kind, without subcategory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Object,
    Attribute,
    Relation,
    SceneAttr,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Object, Kind::Attribute, Kind::Relation, Kind::SceneAttr];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Object => "object",
            Kind::Attribute => "attribute",
            Kind::Relation => "relation",
            Kind::SceneAttr => "scene_attr",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category of a concept: `object`, `attribute:<sub>`, `relation:<sub>` or
/// `scene_attr:<sub>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Object,
    Attribute(AttributeKind),
    Relation(RelationKind),
    SceneAttr(SceneAttrKind),
}

impl Category {
    pub fn kind(self) -> Kind {
        match self {
            Category::Object => Kind::Object,
            Category::Attribute(_) => Kind::Attribute,
            Category::Relation(_) => Kind::Relation,
            Category::SceneAttr(_) => Kind::SceneAttr,
        }
    }

    /// Every category in canonical order.
    pub fn all() -> Vec<Category> {
        let mut out = vec![Category::Object];
        out.extend(AttributeKind::ALL.iter().map(|&k| Category::Attribute(k)));
        out.extend(RelationKind::ALL.iter().map(|&k| Category::Relation(k)));
        out.extend(SceneAttrKind::ALL.iter().map(|&k| Category::SceneAttr(k)));
        out
    }

    pub fn subcategory(self) -> Option<&'static str> {
        match self {
            Category::Object => None,
            Category::Attribute(k) => Some(k.as_str()),
            Category::Relation(k) => Some(k.as_str()),
            Category::SceneAttr(k) => Some(k.as_str()),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subcategory() {
            None => f.write_str(self.kind().as_str()),
            Some(sub) => write!(f, "{}:{}", self.kind(), sub),
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::UnknownCategory(s.to_string());
        match s.split_once(':') {
            None if s == "object" => Ok(Category::Object),
            None => Err(bad()),
            Some(("attribute", sub)) => AttributeKind::parse(sub).map(Category::Attribute).ok_or_else(bad),
            Some(("relation", sub)) => RelationKind::parse(sub).map(Category::Relation).ok_or_else(bad),
            Some(("scene_attr", sub)) => SceneAttrKind::parse(sub).map(Category::SceneAttr).ok_or_else(bad),
            Some(_) => Err(bad()),
        }
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
