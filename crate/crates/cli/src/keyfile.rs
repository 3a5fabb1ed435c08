//! JSON key files with hex-encoded fields.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stealthkit::dksap::{AuditorBundle, KeyBundle, PublicBundle};
use stealthkit::group::{Backend, Group, Point, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyKind {
    Receiver,
    Auditor,
    Public,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KeyFile {
    pub backend: String,
    pub kind: KeyKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scan_private: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scan_public: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spend_private: Option<String>,
    pub spend_public: String,
}

pub enum Keys<B: Backend> {
    Receiver(KeyBundle<B>),
    Auditor(AuditorBundle<B>),
    Public(PublicBundle<B>),
}

impl KeyFile {
    pub fn receiver<B: Backend>(k: &KeyBundle<B>) -> Self {
        KeyFile {
            backend: B::NAME.into(),
            kind: KeyKind::Receiver,
            scan_private: Some(hex::encode(k.scan_private().to_vec())),
            scan_public: Some(hex::encode(k.scan_public().to_vec())),
            spend_private: Some(hex::encode(k.spend_private().to_vec())),
            spend_public: hex::encode(k.spend_public().to_vec()),
        }
    }

    pub fn auditor<B: Backend>(k: &AuditorBundle<B>) -> Self {
        KeyFile {
            backend: B::NAME.into(),
            kind: KeyKind::Auditor,
            scan_private: Some(hex::encode(k.scan_private().to_vec())),
            scan_public: None,
            spend_private: None,
            spend_public: hex::encode(k.spend_public().to_vec()),
        }
    }

    pub fn public<B: Backend>(k: &PublicBundle<B>) -> Self {
        KeyFile {
            backend: B::NAME.into(),
            kind: KeyKind::Public,
            scan_private: None,
            scan_public: Some(hex::encode(k.scan_public().to_vec())),
            spend_private: None,
            spend_public: hex::encode(k.spend_public().to_vec()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Decodes and checks the keys for backend `B`.
    pub fn decode<B: Backend>(&self, g: &Group<B>) -> Result<Keys<B>> {
        if self.backend != B::NAME {
            bail!("key file is for backend {}, not {}", self.backend, B::NAME);
        }
        let spend_public = point::<B>(&self.spend_public, "spend_public")?;
        Ok(match self.kind {
            KeyKind::Receiver => {
                let k = KeyBundle::from_parts(
                    scalar(field(&self.scan_private, "scan_private")?, "scan_private")?,
                    point(field(&self.scan_public, "scan_public")?, "scan_public")?,
                    scalar(field(&self.spend_private, "spend_private")?, "spend_private")?,
                    spend_public,
                );
                k.validate(g).context("receiver key file is inconsistent")?;
                Keys::Receiver(k)
            }
            KeyKind::Auditor => Keys::Auditor(AuditorBundle::new(
                scalar(field(&self.scan_private, "scan_private")?, "scan_private")?,
                spend_public,
            )?),
            KeyKind::Public => Keys::Public(PublicBundle::new(
                point(field(&self.scan_public, "scan_public")?, "scan_public")?,
                spend_public,
            )?),
        })
    }
}

impl<B: Backend> Keys<B> {
    /// Public bundle of any key file that has one.
    pub fn public(&self) -> Result<PublicBundle<B>> {
        match self {
            Keys::Receiver(k) => Ok(k.public()),
            Keys::Public(p) => Ok(p.clone()),
            Keys::Auditor(_) => bail!("an auditor key file has no scan public key"),
        }
    }
}

fn field<'a>(v: &'a Option<String>, name: &str) -> Result<&'a str> {
    v.as_deref().with_context(|| format!("key file is missing {name}"))
}

fn scalar<B: Backend>(hex_str: &str, name: &str) -> Result<Scalar<B>> {
    let bytes = hex::decode(hex_str).with_context(|| format!("{name} is not hex"))?;
    Scalar::from_bytes(&bytes).with_context(|| format!("{name} is not a valid scalar"))
}

fn point<B: Backend>(hex_str: &str, name: &str) -> Result<Point<B>> {
    let bytes = hex::decode(hex_str).with_context(|| format!("{name} is not hex"))?;
    Point::from_bytes_nonidentity(&bytes).with_context(|| format!("{name} is not a valid point"))
}
