use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChainError, ChainSource, ScanRange};
use crate::abidec::{encode_event, AbiDocument, AbiError, AbiValue, EventLayout};
use crate::model::{hex_bytes, Address, CallType, EventLogRecord, TopicHash, TraceRecord};

/// Code deployed at an address for blocks `from_block..until_block`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpan {
    #[serde(with = "hex_bytes")]
    pub code: Vec<u8>,
    #[serde(default)]
    pub from_block: u64,
    #[serde(default)]
    pub until_block: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CodeLine {
    address: Address,
    #[serde(flatten)]
    span: CodeSpan,
}

#[derive(Serialize, Deserialize)]
struct AbiLine {
    address: Address,
    abi: Option<Value>,
}

/// An offline chain backed by four JSONL files (`traces.jsonl`,
/// `logs.jsonl`, `code.jsonl`, `abi.jsonl`) and an optional
/// `coverage.json` holding the covered [`ScanRange`].
///
/// Addresses absent from `code.jsonl` have no code; addresses absent from
/// `abi.jsonl` have no verified ABI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureChain {
    traces: Vec<TraceRecord>,
    logs: Vec<EventLogRecord>,
    code: BTreeMap<Address, Vec<CodeSpan>>,
    abis: BTreeMap<Address, Option<Value>>,
    coverage: Option<ScanRange>,
    name: String,
    next_block: u64,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ChainError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ChainError::Fixture(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), ChainError> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, &row).map_err(|e| ChainError::Fixture(e.to_string()))?;
        buf.push(b'\n');
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

impl FixtureChain {
    pub fn new() -> Self {
        FixtureChain { name: "fixture".into(), next_block: 1, ..Default::default() }
    }

    pub fn load(dir: &Path) -> Result<Self, ChainError> {
        if !dir.is_dir() {
            return Err(ChainError::DataUnavailable(format!("fixture directory {} not found", dir.display())));
        }
        let mut chain = FixtureChain::new();
        chain.name = format!("fixture:{}", dir.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
        chain.traces = read_jsonl(&dir.join("traces.jsonl"))?;
        for log in read_jsonl::<EventLogRecord>(&dir.join("logs.jsonl"))? {
            chain.push_log(log)?;
        }
        for line in read_jsonl::<CodeLine>(&dir.join("code.jsonl"))? {
            chain.add_code_span(line.address, line.span);
        }
        for line in read_jsonl::<AbiLine>(&dir.join("abi.jsonl"))? {
            chain.abis.insert(line.address, line.abi);
        }
        let coverage = dir.join("coverage.json");
        if coverage.exists() {
            let text = fs::read_to_string(&coverage)?;
            chain.coverage = Some(serde_json::from_str(&text).map_err(|e| ChainError::Fixture(e.to_string()))?);
        }
        chain.next_block = chain
            .traces
            .iter()
            .map(|t| t.block_number)
            .chain(chain.logs.iter().map(|l| l.block_number))
            .max()
            .unwrap_or(0)
            + 1;
        Ok(chain)
    }

    /// Writes the fixture files. Output is sorted, so equal fixtures give
    /// identical bytes.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ChainError> {
        fs::create_dir_all(dir)?;
        let mut traces = self.traces.clone();
        traces.sort_by(|a, b| {
            (a.block_number, a.tx_index, &a.trace_address).cmp(&(b.block_number, b.tx_index, &b.trace_address))
        });
        write_jsonl(&dir.join("traces.jsonl"), &traces)?;
        let mut logs = self.logs.clone();
        logs.sort_by_key(EventLogRecord::position);
        write_jsonl(&dir.join("logs.jsonl"), &logs)?;
        write_jsonl(
            &dir.join("code.jsonl"),
            self.code
                .iter()
                .flat_map(|(a, spans)| spans.iter().map(move |s| CodeLine { address: *a, span: s.clone() })),
        )?;
        write_jsonl(
            &dir.join("abi.jsonl"),
            self.abis.iter().map(|(a, abi)| AbiLine { address: *a, abi: abi.clone() }),
        )?;
        if let Some(coverage) = self.coverage {
            fs::write(dir.join("coverage.json"), serde_json::to_string(&coverage).expect("serializable") + "\n")?;
        }
        Ok(())
    }

    pub fn set_coverage(&mut self, range: ScanRange) {
        self.coverage = Some(range);
    }

    pub fn set_code(&mut self, address: Address, code: Vec<u8>) {
        self.code.insert(address, vec![CodeSpan { code, from_block: 0, until_block: None }]);
    }

    /// Marks `address` as a contract with placeholder code.
    pub fn add_contract(&mut self, address: Address) {
        self.set_code(address, vec![0x60, 0x80, 0x60, 0x40]);
    }

    pub fn add_code_span(&mut self, address: Address, span: CodeSpan) {
        self.code.entry(address).or_default().push(span);
    }

    pub fn set_abi(&mut self, address: Address, abi: &AbiDocument) {
        self.abis.insert(address, Some(abi.to_json()));
    }

    /// Records the contract as having an ABI built from event declarations
    /// (see [`EventLayout::from_declaration`]) plus function signatures.
    pub fn set_abi_from(
        &mut self,
        address: Address,
        events: &[&EventLayout],
        functions: &[&str],
    ) -> Result<(), AbiError> {
        let mut doc = AbiDocument::default();
        for layout in events {
            doc.items.push(layout.to_item());
        }
        for f in functions {
            let sig: crate::model::CanonicalSignature =
                f.parse().map_err(|e: crate::model::ParseError| AbiError::Parse(e.to_string()))?;
            let inputs = sig
                .params()
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    Ok(crate::abidec::AbiParam {
                        name: format!("arg{i}"),
                        ty: crate::abidec::AbiType::parse(t)?,
                        indexed: false,
                    })
                })
                .collect::<Result<Vec<_>, AbiError>>()?;
            doc.items.push(crate::abidec::AbiItem {
                kind: crate::abidec::AbiItemKind::Function,
                name: sig.name().to_owned(),
                inputs,
                anonymous: false,
            });
        }
        self.set_abi(address, &doc);
        Ok(())
    }

    /// Stores an ABI entry verbatim; `None` records an unverified contract.
    pub fn set_raw_abi(&mut self, address: Address, abi: Option<Value>) {
        self.abis.insert(address, abi);
    }

    fn bump_block(&mut self) -> u64 {
        let b = self.next_block;
        self.next_block += 1;
        b
    }

    /// Adds one call in a fresh block.
    pub fn add_call(&mut self, from: Address, to: Address, call_type: CallType) {
        let block = self.bump_block();
        self.add_trace(TraceRecord { from, to, call_type, block_number: block, tx_index: 0, trace_address: vec![0] });
    }

    pub fn add_calls(&mut self, from: Address, to: Address, call_type: CallType, n: usize) {
        for _ in 0..n {
            self.add_call(from, to, call_type);
        }
    }

    pub fn add_trace(&mut self, trace: TraceRecord) {
        self.next_block = self.next_block.max(trace.block_number + 1);
        self.traces.push(trace);
    }

    fn push_log(&mut self, log: EventLogRecord) -> Result<(), ChainError> {
        if log.topics.len() > 4 {
            return Err(ChainError::Fixture(format!("log at {:?} has {} topics", log.position(), log.topics.len())));
        }
        if self.logs.iter().any(|l| l.position() == log.position()) {
            return Err(ChainError::Fixture(format!("duplicate log position {:?}", log.position())));
        }
        self.next_block = self.next_block.max(log.block_number + 1);
        self.logs.push(log);
        Ok(())
    }

    pub fn add_log(&mut self, log: EventLogRecord) -> Result<(), ChainError> {
        self.push_log(log)
    }

    /// Encodes and stores an event at an explicit position.
    pub fn emit_at(
        &mut self,
        emitter: Address,
        layout: &EventLayout,
        values: &[AbiValue],
        block: u64,
        tx_index: u64,
        log_index: u64,
    ) -> Result<EventLogRecord, ChainError> {
        let (topics, data) = encode_event(layout, values).map_err(|e| ChainError::Fixture(e.to_string()))?;
        let log = EventLogRecord { emitter, topics, data, block_number: block, tx_index, log_index };
        self.push_log(log.clone())?;
        Ok(log)
    }

    /// Encodes and stores an event in a fresh block.
    pub fn emit(
        &mut self,
        emitter: Address,
        layout: &EventLayout,
        values: &[AbiValue],
    ) -> Result<EventLogRecord, ChainError> {
        let block = self.bump_block();
        self.emit_at(emitter, layout, values, block, 0, 0)
    }

    pub fn traces(&self) -> &[TraceRecord] {
        &self.traces
    }

    pub fn all_logs(&self) -> &[EventLogRecord] {
        &self.logs
    }

    /// Every address with code at any height.
    pub fn contracts(&self) -> BTreeSet<Address> {
        self.code.keys().copied().collect()
    }

    /// A range covering all recorded data.
    pub fn full_range(&self) -> ScanRange {
        self.coverage.unwrap_or(ScanRange { start_block: 0, end_block: self.next_block })
    }

    fn check(&self, range: &ScanRange) -> Result<(), ChainError> {
        match self.coverage {
            Some(cov) if !cov.covers(range) => {
                Err(ChainError::DataUnavailable(format!("range {range} outside fixture coverage {cov}")))
            }
            _ => Ok(()),
        }
    }
}

impl ChainSource for FixtureChain {
    fn calls_to(&self, target: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError> {
        self.check(&range)?;
        Ok(self.traces.iter().filter(|t| t.to == target && range.contains(t.block_number)).cloned().collect())
    }

    fn calls_from(&self, caller: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError> {
        self.check(&range)?;
        Ok(self.traces.iter().filter(|t| t.from == caller && range.contains(t.block_number)).cloned().collect())
    }

    fn code_at(&self, address: Address, block: u64) -> Result<Vec<u8>, ChainError> {
        if let Some(cov) = self.coverage {
            if !cov.contains(block) {
                return Err(ChainError::DataUnavailable(format!("block {block} outside fixture coverage {cov}")));
            }
        }
        Ok(self
            .code
            .get(&address)
            .into_iter()
            .flatten()
            .find(|s| s.from_block <= block && s.until_block.is_none_or(|u| block < u))
            .map(|s| s.code.clone())
            .unwrap_or_default())
    }

    fn contract_abi(&self, address: Address) -> Result<Option<Value>, ChainError> {
        Ok(self.abis.get(&address).cloned().flatten())
    }

    fn logs(
        &self,
        emitter: Address,
        range: ScanRange,
        topic0: Option<TopicHash>,
    ) -> Result<Vec<EventLogRecord>, ChainError> {
        self.check(&range)?;
        Ok(self
            .logs
            .iter()
            .filter(|l| l.emitter == emitter && range.contains(l.block_number))
            .filter(|l| topic0.is_none() || l.topic0() == topic0)
            .cloned()
            .collect())
    }

    fn provenance(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abidec::Word;

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let layout = EventLayout::from_declaration("VoteCast(address indexed voter, uint256 weight)").unwrap();
        let mut chain = FixtureChain::new();
        chain.add_contract(Address::from_low_u64(1));
        chain.add_code_span(Address::from_low_u64(2), CodeSpan { code: vec![1], from_block: 3, until_block: Some(9) });
        chain.set_abi_from(Address::from_low_u64(1), &[&layout], &["castVote(uint256,uint8)"]).unwrap();
        chain.set_raw_abi(Address::from_low_u64(3), None);
        chain.add_calls(Address::from_low_u64(1), Address::from_low_u64(4), CallType::Call, 3);
        chain
            .emit(
                Address::from_low_u64(1),
                &layout,
                &[AbiValue::Address(Address::from_low_u64(7)), AbiValue::Uint(Word::from_u128(5))],
            )
            .unwrap();
        chain.set_coverage(ScanRange::new(0, 100).unwrap());
        chain.write_dir(dir.path()).unwrap();

        let loaded = FixtureChain::load(dir.path()).unwrap();
        let second = tempfile::tempdir().unwrap();
        loaded.write_dir(second.path()).unwrap();
        for f in ["traces.jsonl", "logs.jsonl", "code.jsonl", "abi.jsonl", "coverage.json"] {
            assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(second.path().join(f)).unwrap(), "{f}");
        }
        assert_eq!(loaded.traces().len(), 3);
        assert_eq!(loaded.code_at(Address::from_low_u64(2), 5).unwrap(), vec![1]);
    }

    #[test]
    fn duplicate_log_positions_are_rejected() {
        let layout = EventLayout::from_declaration("Ping()").unwrap();
        let mut chain = FixtureChain::new();
        chain.emit_at(Address::ZERO, &layout, &[], 1, 0, 0).unwrap();
        assert!(chain.emit_at(Address::from_low_u64(1), &layout, &[], 1, 0, 0).is_err());
    }

    #[test]
    fn missing_directory_is_unavailable() {
        assert!(matches!(FixtureChain::load(Path::new("/nonexistent/fixture")), Err(ChainError::DataUnavailable(_))));
    }
}
