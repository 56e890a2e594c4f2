//! Human-readable identities for contract accounts.
//!
//! Each address gets at most one label. A local override beats a public
//! name tag, which beats a Snapshot space hint. A tag such as
//! `"Liquity: Bounties"` maps to the DAO id `"liquity"`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chainio::{HttpRequest, Transport, TransportError};
use crate::model::Address;
use crate::snapshotio::SpaceIndex;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed label data: {0}")]
    Malformed(String),
    #[error("override file {path}: {message}")]
    Override { path: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Where a label came from, highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelSource {
    LocalOverride,
    PublicNameTag,
    SnapshotSpace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub address: Address,
    pub tag: Option<String>,
    /// `None` for unlabelled addresses.
    pub source: Option<LabelSource>,
    pub dao_id: Option<String>,
}

impl LabelRecord {
    pub fn is_labelled(&self) -> bool {
        self.tag.as_deref().is_some_and(|t| !t.is_empty())
    }

    /// The grouping key: the DAO id, or the address when there is none.
    pub fn group_key(&self) -> String {
        self.dao_id.clone().unwrap_or_else(|| self.address.to_string())
    }
}

/// `"Liquity: Bounties"` becomes `"liquity"`.
pub fn tag_to_dao_id(tag: &str) -> Option<String> {
    let head = tag.split(':').next().unwrap_or_default().trim().to_lowercase();
    (!head.is_empty()).then_some(head)
}

/// The organisation part of a tag with its original casing.
pub fn tag_display_name(tag: &str) -> String {
    tag.split(':').next().unwrap_or_default().trim().to_owned()
}

/// `"aave.eth"` becomes `"aave"`.
pub fn space_to_dao_id(space_id: &str) -> Option<String> {
    let lower = space_id.trim().to_lowercase();
    let id = lower.strip_suffix(".eth").unwrap_or(&lower);
    (!id.is_empty()).then(|| id.to_owned())
}

pub trait NameTagSource: Send + Sync {
    fn name_tag(&self, address: Address) -> Result<Option<String>, LabelError>;
}

/// Name tags held in memory; loadable from `labels.jsonl` lines of
/// `{"address": .., "tag": ..}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureTags {
    tags: BTreeMap<Address, String>,
}

#[derive(Serialize, Deserialize)]
struct TagLine {
    address: Address,
    tag: String,
}

impl FixtureTags {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: Address, tag: &str) {
        self.tags.insert(address, tag.to_owned());
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let mut out = FixtureTags::new();
        if !path.exists() {
            return Ok(out);
        }
        for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: TagLine = serde_json::from_str(&line)
                .map_err(|e| LabelError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
            out.tags.insert(t.address, t.tag);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), LabelError> {
        let mut text = String::new();
        for (address, tag) in &self.tags {
            text.push_str(
                &serde_json::to_string(&TagLine { address: *address, tag: tag.clone() }).expect("tag serializes"),
            );
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }
}

impl NameTagSource for FixtureTags {
    fn name_tag(&self, address: Address) -> Result<Option<String>, LabelError> {
        Ok(self.tags.get(&address).cloned())
    }
}

/// Public name tags from an Etherscan-compatible explorer.
pub struct ExplorerTags<T> {
    base_url: String,
    api_key: Option<String>,
    transport: T,
}

impl<T: Transport> ExplorerTags<T> {
    pub fn new(base_url: &str, api_key: Option<String>, transport: T) -> Self {
        ExplorerTags { base_url: base_url.to_owned(), api_key, transport }
    }
}

impl<T: NameTagSource + ?Sized> NameTagSource for Box<T> {
    fn name_tag(&self, address: Address) -> Result<Option<String>, LabelError> {
        (**self).name_tag(address)
    }
}

impl<T: Transport> NameTagSource for ExplorerTags<T> {
    fn name_tag(&self, address: Address) -> Result<Option<String>, LabelError> {
        let mut url = format!("{}?module=nametag&action=getaddresstag&address={address}", self.base_url);
        if let Some(key) = &self.api_key {
            url.push_str(&format!("&apikey={key}"));
        }
        let body = self.transport.send(&HttpRequest::get(url))?;
        let message = body["result"].as_str().unwrap_or_default().to_ascii_lowercase();
        if message.contains("rate limit") {
            return Err(TransportError::RateLimited(self.base_url.clone()).into());
        }
        let tag = match &body["result"] {
            Value::Array(items) => items.first().and_then(|i| i["nametag"].as_str()),
            Value::Object(_) => body["result"]["nametag"].as_str(),
            _ => None,
        };
        Ok(tag.map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OverrideEntry {
    pub tag: Option<String>,
    pub dao_id: Option<String>,
}

/// Analyst corrections from a CSV of `address,tag,dao-id`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalOverrides {
    entries: BTreeMap<Address, OverrideEntry>,
}

impl LocalOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: Address, tag: Option<&str>, dao_id: Option<&str>) {
        let clean = |s: Option<&str>| s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned);
        self.entries.insert(address, OverrideEntry { tag: clean(tag), dao_id: clean(dao_id) });
    }

    pub fn get(&self, address: Address) -> Option<&OverrideEntry> {
        self.entries.get(&address)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &OverrideEntry)> {
        self.entries.iter()
    }

    /// Reads a CSV with header `address,tag,dao-id`. Later rows win.
    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let err = |message: String| LabelError::Override { path: path.display().to_string(), message };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| err(e.to_string()))?;
        let mut out = LocalOverrides::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| err(e.to_string()))?;
            let address: Address =
                row.get(0).unwrap_or_default().parse().map_err(|e| err(format!("row {}: {e}", i + 2)))?;
            out.insert(address, row.get(1), row.get(2));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), LabelError> {
        let err = |e: csv::Error| LabelError::Override { path: path.display().to_string(), message: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["address", "tag", "dao-id"]).map_err(err)?;
        for (a, e) in &self.entries {
            w.write_record([a.to_string(), e.tag.clone().unwrap_or_default(), e.dao_id.clone().unwrap_or_default()])
                .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Snapshot space ids keyed by treasury addresses declared by the space.
pub fn space_hints(index: &SpaceIndex) -> BTreeMap<Address, String> {
    let mut hints = BTreeMap::new();
    for space in index.spaces() {
        for t in &space.treasuries {
            hints.entry(*t).or_insert_with(|| space.id.clone());
        }
    }
    hints
}

#[derive(Default)]
pub struct Labeler {
    overrides: LocalOverrides,
    tags: Option<Box<dyn NameTagSource>>,
    space_hints: BTreeMap<Address, String>,
}

impl Labeler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_overrides(mut self, overrides: LocalOverrides) -> Self {
        self.overrides = overrides;
        self
    }

    pub fn with_tags(mut self, tags: impl NameTagSource + 'static) -> Self {
        self.tags = Some(Box::new(tags));
        self
    }

    pub fn with_space_hints(mut self, hints: BTreeMap<Address, String>) -> Self {
        self.space_hints = hints;
        self
    }

    pub fn set_space_hints(&mut self, hints: BTreeMap<Address, String>) {
        self.space_hints = hints;
    }

    pub fn overrides(&self) -> &LocalOverrides {
        &self.overrides
    }

    pub fn label(&self, address: Address) -> Result<LabelRecord, LabelError> {
        if let Some(o) = self.overrides.get(address) {
            if o.tag.is_some() || o.dao_id.is_some() {
                let dao_id = o.dao_id.clone().or_else(|| o.tag.as_deref().and_then(tag_to_dao_id));
                return Ok(LabelRecord {
                    address,
                    tag: o.tag.clone(),
                    source: Some(LabelSource::LocalOverride),
                    dao_id,
                });
            }
        }
        if let Some(tags) = &self.tags {
            if let Some(tag) = tags.name_tag(address)?.filter(|t| !t.trim().is_empty()) {
                let dao_id = tag_to_dao_id(&tag);
                return Ok(LabelRecord { address, tag: Some(tag), source: Some(LabelSource::PublicNameTag), dao_id });
            }
        }
        if let Some(space) = self.space_hints.get(&address) {
            return Ok(LabelRecord {
                address,
                tag: Some(space.clone()),
                source: Some(LabelSource::SnapshotSpace),
                dao_id: space_to_dao_id(space),
            });
        }
        Ok(LabelRecord { address, tag: None, source: None, dao_id: None })
    }

    /// One record per address, in address order.
    pub fn label_accounts(&self, addresses: &BTreeSet<Address>) -> Result<Vec<LabelRecord>, LabelError> {
        addresses.iter().map(|a| self.label(*a)).collect()
    }
}

/// Groups addresses by DAO id; unlabelled addresses form singleton groups
/// keyed by their own address.
pub fn group_by_dao(records: &[LabelRecord]) -> BTreeMap<String, BTreeSet<Address>> {
    let mut groups: BTreeMap<String, BTreeSet<Address>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group_key()).or_default().insert(r.address);
    }
    groups
}
