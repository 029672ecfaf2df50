//! Shared domain types: contents, tags, the tag repository and final
//! assignments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, VertexKind};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $kind:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self> {
                let id = id.into();
                if id.trim().is_empty() {
                    return Err(Error::invalid(concat!($kind, " id must be non-empty")));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl TryFrom<&str> for $name {
            type Error = Error;

            fn try_from(value: &str) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of a content item. Never empty.
    ContentId,
    "content"
);
string_id!(
    /// Identifier of a tag in the repository. Never empty.
    TagId,
    "tag"
);

/// A textual item to be tagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ContentRecord", into = "ContentRecord")]
pub struct Content {
    pub id: ContentId,
    pub title: String,
    pub category: String,
    pub body: String,
    pub extra: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContentRecord {
    id: ContentId,
    #[serde(default)]
    title: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    category: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    body: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, String>,
}

impl TryFrom<ContentRecord> for Content {
    type Error = Error;

    fn try_from(r: ContentRecord) -> Result<Self> {
        Content::builder(r.id)
            .title(r.title)
            .category(r.category)
            .body(r.body)
            .extras(r.extra)
            .build()
    }
}

impl From<Content> for ContentRecord {
    fn from(c: Content) -> Self {
        ContentRecord {
            id: c.id,
            title: c.title,
            category: c.category,
            body: c.body,
            extra: c.extra,
        }
    }
}

impl Content {
    pub fn builder(id: ContentId) -> ContentBuilder {
        ContentBuilder {
            id,
            title: String::new(),
            category: String::new(),
            body: String::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Shorthand for a content with only a title.
    pub fn titled(id: &str, title: &str) -> Result<Self> {
        Content::builder(ContentId::new(id)?).title(title).build()
    }

    pub fn canonical_text(&self) -> String {
        join_fields(
            [
                self.title.as_str(),
                self.category.as_str(),
                self.body.as_str(),
            ]
            .into_iter()
            .chain(self.extra.values().map(String::as_str)),
        )
    }
}

pub struct ContentBuilder {
    id: ContentId,
    title: String,
    category: String,
    body: String,
    extra: BTreeMap<String, String>,
}

impl ContentBuilder {
    pub fn title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn category(mut self, category: impl Into<String>) -> Self {
        self.category = category.into();
        self
    }

    pub fn body(mut self, body: impl Into<String>) -> Self {
        self.body = body.into();
        self
    }

    pub fn extra(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }

    fn extras(mut self, extra: BTreeMap<String, String>) -> Self {
        self.extra.extend(extra);
        self
    }

    pub fn build(self) -> Result<Content> {
        if self.title.trim().is_empty() && self.body.trim().is_empty() {
            return Err(Error::invalid(format!(
                "content `{}` needs a non-empty title or body",
                self.id
            )));
        }
        Ok(Content {
            id: self.id,
            title: self.title,
            category: self.category,
            body: self.body,
            extra: self.extra,
        })
    }
}

/// An entry of the controlled tag vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TagRecord", into = "TagRecord")]
pub struct Tag {
    pub id: TagId,
    pub name: String,
    pub description: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TagRecord {
    id: TagId,
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

impl TryFrom<TagRecord> for Tag {
    type Error = Error;

    fn try_from(r: TagRecord) -> Result<Self> {
        Tag::new(r.id, r.name, r.description)
    }
}

impl From<Tag> for TagRecord {
    fn from(t: Tag) -> Self {
        TagRecord {
            id: t.id,
            name: t.name,
            description: t.description,
        }
    }
}

impl Tag {
    pub fn new(id: TagId, name: impl Into<String>, description: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::invalid(format!("tag `{id}` needs a non-empty name")));
        }
        Ok(Tag {
            id,
            name,
            description: description.into(),
        })
    }

    /// Shorthand for a tag without description.
    pub fn named(id: &str, name: &str) -> Result<Self> {
        Tag::new(TagId::new(id)?, name, "")
    }

    pub fn canonical_text(&self) -> String {
        join_fields([self.name.as_str(), self.description.as_str()])
    }
}

fn join_fields<'a>(fields: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for field in fields.into_iter().map(str::trim).filter(|f| !f.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(field);
    }
    out
}

/// Lowercases and collapses whitespace; two tags whose names normalize
/// equally are the same tag.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The controlled tag vocabulary.
#[derive(Debug, Clone, Default)]
pub struct TagRepository {
    tags: BTreeMap<TagId, Tag>,
    by_name: HashMap<String, TagId>,
}

impl TagRepository {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails without modifying the repository on duplicate id or name.
    pub fn insert(&mut self, tag: Tag) -> Result<()> {
        if self.tags.contains_key(&tag.id) {
            return Err(Error::DuplicateVertex {
                kind: VertexKind::Tag,
                id: tag.id.to_string(),
            });
        }
        let key = normalize_name(&tag.name);
        if let Some(existing) = self.by_name.get(&key) {
            return Err(Error::DuplicateTagName {
                name: tag.name.clone(),
                existing: existing.to_string(),
            });
        }
        self.by_name.insert(key, tag.id.clone());
        self.tags.insert(tag.id.clone(), tag);
        Ok(())
    }

    pub fn get(&self, id: &TagId) -> Result<&Tag> {
        self.tags
            .get(id)
            .ok_or_else(|| Error::unknown(VertexKind::Tag, id.as_str()))
    }

    pub fn find(&self, id: &str) -> Option<&Tag> {
        self.tags.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tag> {
        self.by_name
            .get(&normalize_name(name))
            .and_then(|id| self.tags.get(id))
    }

    pub fn contains(&self, id: &TagId) -> bool {
        self.tags.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Tags in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Tag> {
        self.tags.values()
    }
}

impl FromIterator<Tag> for Result<TagRepository> {
    fn from_iter<I: IntoIterator<Item = Tag>>(iter: I) -> Self {
        let mut repo = TagRepository::new();
        for tag in iter {
            repo.insert(tag)?;
        }
        Ok(repo)
    }
}

/// How a tag reached a content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    /// Content→tag similarity hop.
    C2T,
    /// Content→similar content→annotated tag.
    C2C2T,
    /// Reached by both meta-paths.
    #[serde(rename = "BOTH")]
    Both,
    /// Confirmed annotation written back to the graph.
    #[serde(rename = "FEEDBACK")]
    Feedback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::C2T => "C2T",
            Provenance::C2C2T => "C2C2T",
            Provenance::Both => "BOTH",
            Provenance::Feedback => "FEEDBACK",
        }
    }
}

/// A tag attached to a content, with its calibrated confidence once known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagAssignment {
    pub content: ContentId,
    pub tag: TagId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
    pub provenance: Provenance,
}

impl TagAssignment {
    pub fn new(
        content: ContentId,
        tag: TagId,
        confidence: Option<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if let Some(c) = confidence {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::invalid(format!(
                    "confidence {c} for `{tag}` outside (0, 1)"
                )));
            }
        }
        Ok(TagAssignment {
            content,
            tag,
            confidence,
            provenance,
        })
    }
}
