//! Voter and delegation extraction from governance logs.
//!
//! The voting event of a governor is taken to be its most frequent log
//! topic. Voters are read from the decoded `voter` field when the layout is
//! known, otherwise from the first address-shaped word of the log data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::abidec::{decode_event, scavenge_addresses, AbiType, AbiValue, DecodedEvent, EventLayout};
use crate::chainio::{account_kind, fetch_contract_metadata, fetch_logs, ChainError, ChainSource, ScanRange};
use crate::govscan::abi_entries;
use crate::model::{AccountKind, Address, CanonicalSignature, EventLogRecord, TopicHash};
use crate::sigstore::{find_delegation_signatures, KeywordPolicy, SignatureStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub governor: Address,
    pub voter: Address,
    pub voter_kind: AccountKind,
    /// Decimal text; proposal ids are often 256-bit hashes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<u8>,
    /// Raw token base units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<u128>,
    pub block_number: u64,
    pub tx_index: u64,
    pub log_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationRecord {
    pub token: Address,
    pub delegator: Address,
    pub delegate: Address,
    pub delegator_kind: AccountKind,
    pub delegate_kind: AccountKind,
    pub self_delegation: bool,
    pub block_number: u64,
    pub tx_index: u64,
    pub log_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VotingEventSelection {
    pub governor: Address,
    /// Head of `frequency_table`; `None` when the governor emitted nothing.
    pub topic: Option<TopicHash>,
    pub layout: Option<EventLayout>,
    /// Known signature for `topic` when no ABI layout was available.
    pub known_signature: Option<CanonicalSignature>,
    pub frequency_table: Vec<(TopicHash, u64)>,
    /// Topics sharing the top count, when there was a tie.
    pub tied: Vec<TopicHash>,
    /// Logs without any topic; they cannot be the voting event.
    pub topicless_logs: u64,
}

impl VotingEventSelection {
    pub fn is_empty(&self) -> bool {
        self.topic.is_none()
    }

    pub fn total_logs(&self) -> u64 {
        self.frequency_table.iter().map(|(_, n)| n).sum::<u64>() + self.topicless_logs
    }
}

/// A log that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogFailure {
    pub block_number: u64,
    pub tx_index: u64,
    pub log_index: u64,
    pub reason: String,
}

impl LogFailure {
    fn at(log: &EventLogRecord, reason: impl Into<String>) -> Self {
        LogFailure {
            block_number: log.block_number,
            tx_index: log.tx_index,
            log_index: log.log_index,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteScan {
    pub selection: VotingEventSelection,
    pub records: Vec<VoteRecord>,
    pub failures: Vec<LogFailure>,
}

impl VoteScan {
    /// Contract-account voters, deduplicated.
    pub fn contract_voters(&self) -> BTreeSet<Address> {
        self.records.iter().filter(|r| r.voter_kind.is_contract()).map(|r| r.voter).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DelegationScan {
    pub token: Address,
    pub records: Vec<DelegationRecord>,
    /// The token has no verified ABI.
    pub no_abi: bool,
    /// The ABI declares no usable delegation event.
    pub no_delegation_events: bool,
    pub events_used: Vec<CanonicalSignature>,
    /// Delegation-named events without a delegator/delegate pair.
    pub events_skipped: Vec<CanonicalSignature>,
    /// Matching logs where both parties are externally owned.
    pub eoa_only: u64,
    pub failures: Vec<LogFailure>,
}

/// Caches account kinds at one block height.
struct KindCache<'a> {
    chain: &'a dyn ChainSource,
    block: u64,
    kinds: BTreeMap<Address, AccountKind>,
}

impl<'a> KindCache<'a> {
    fn new(chain: &'a dyn ChainSource, block: u64) -> Self {
        KindCache { chain, block, kinds: BTreeMap::new() }
    }

    fn kind(&mut self, address: Address) -> Result<AccountKind, ChainError> {
        if let Some(k) = self.kinds.get(&address) {
            return Ok(*k);
        }
        let k = account_kind(self.chain, address, self.block)?;
        self.kinds.insert(address, k);
        Ok(k)
    }
}

pub struct VoterScanner<'a> {
    chain: &'a dyn ChainSource,
    store: &'a SignatureStore,
    policy: &'a KeywordPolicy,
}

impl<'a> VoterScanner<'a> {
    pub fn new(chain: &'a dyn ChainSource, store: &'a SignatureStore, policy: &'a KeywordPolicy) -> Self {
        VoterScanner { chain, store, policy }
    }

    pub fn select_voting_event(&self, governor: Address, range: ScanRange) -> Result<VotingEventSelection, ChainError> {
        let logs = fetch_logs(self.chain, governor, range, None)?;
        self.select_from_logs(governor, &logs)
    }

    fn select_from_logs(&self, governor: Address, logs: &[EventLogRecord]) -> Result<VotingEventSelection, ChainError> {
        let mut counts: BTreeMap<TopicHash, u64> = BTreeMap::new();
        let mut topicless_logs = 0;
        for log in logs {
            match log.topic0() {
                Some(t) => *counts.entry(t).or_insert(0) += 1,
                None => topicless_logs += 1,
            }
        }
        let mut frequency_table: Vec<(TopicHash, u64)> = counts.into_iter().collect();
        frequency_table.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut selection = VotingEventSelection {
            governor,
            topic: frequency_table.first().map(|(t, _)| *t),
            layout: None,
            known_signature: None,
            tied: Vec::new(),
            frequency_table,
            topicless_logs,
        };
        let Some(topic) = selection.topic else {
            return Ok(selection);
        };
        let top = selection.frequency_table[0].1;
        let tied: Vec<TopicHash> =
            selection.frequency_table.iter().take_while(|(_, n)| *n == top).map(|(t, _)| *t).collect();
        if tied.len() > 1 {
            selection.tied = tied;
        }
        selection.layout = self.abi_layout(governor, topic)?;
        if selection.layout.is_none() {
            selection.known_signature = self.store.lookup_topic(&topic).first().map(|e| e.canonical.clone());
        }
        Ok(selection)
    }

    /// The non-anonymous ABI event of `address` hashing to `topic`.
    fn abi_layout(&self, address: Address, topic: TopicHash) -> Result<Option<EventLayout>, ChainError> {
        let abi = match fetch_contract_metadata(self.chain, address) {
            Ok(meta) => meta.abi,
            Err(ChainError::MetadataParse { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(abi.and_then(|abi| {
            abi.events().filter_map(|item| EventLayout::from_item(item).ok()).find(|l| !l.anonymous && l.topic == topic)
        }))
    }

    pub fn extract_vote_records(&self, governor: Address, range: ScanRange) -> Result<VoteScan, ChainError> {
        let logs = fetch_logs(self.chain, governor, range, None)?;
        let selection = self.select_from_logs(governor, &logs)?;
        let mut records = Vec::new();
        let mut failures = Vec::new();
        let Some(topic) = selection.topic else {
            return Ok(VoteScan { selection, records, failures });
        };
        let mut kinds = KindCache::new(self.chain, range.end_block);
        for log in logs.iter().filter(|l| l.topic0() == Some(topic)) {
            let decoded = match &selection.layout {
                Some(layout) => match decode_event(log, layout) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        failures.push(LogFailure::at(log, e.to_string()));
                        None
                    }
                },
                None => None,
            };
            let voter = decoded
                .as_ref()
                .and_then(DecodedEvent::voter)
                .or_else(|| scavenge_addresses(&log.data).first().copied());
            let Some(voter) = voter else {
                if decoded.is_some() || selection.layout.is_none() {
                    failures.push(LogFailure::at(log, "no voter address"));
                }
                continue;
            };
            let roles = decoded.as_ref().map(VoteRoles::read).unwrap_or_default();
            records.push(VoteRecord {
                governor,
                voter,
                voter_kind: kinds.kind(voter)?,
                proposal_id: roles.proposal_id,
                support: roles.support,
                weight: roles.weight,
                block_number: log.block_number,
                tx_index: log.tx_index,
                log_index: log.log_index,
            });
        }
        Ok(VoteScan { selection, records, failures })
    }

    /// Contract accounts that cast the voting event of `governor`.
    pub fn identify_multisig_voters(
        &self,
        governor: Address,
        range: ScanRange,
    ) -> Result<BTreeSet<Address>, ChainError> {
        Ok(self.extract_vote_records(governor, range)?.contract_voters())
    }

    pub fn resolve_delegations(&self, token: Address, range: ScanRange) -> Result<DelegationScan, ChainError> {
        let mut scan = DelegationScan {
            token,
            records: Vec::new(),
            no_abi: false,
            no_delegation_events: false,
            events_used: Vec::new(),
            events_skipped: Vec::new(),
            eoa_only: 0,
            failures: Vec::new(),
        };
        let meta = match fetch_contract_metadata(self.chain, token) {
            Ok(meta) => meta,
            Err(ChainError::MetadataParse { .. }) => {
                scan.no_abi = true;
                return Ok(scan);
            }
            Err(e) => return Err(e),
        };
        let Some(abi) = meta.abi.as_ref().filter(|_| meta.abi_available) else {
            scan.no_abi = true;
            return Ok(scan);
        };
        let layouts: Vec<EventLayout> = abi.events().filter_map(|i| EventLayout::from_item(i).ok()).collect();

        let mut plans = Vec::new();
        for entry in find_delegation_signatures(&abi_entries(&meta, self.store), self.policy) {
            let Some(layout) = layouts.iter().find(|l| !l.anonymous && l.signature == entry.canonical) else {
                continue;
            };
            match DelegationRoles::of(layout) {
                Some(roles) => {
                    scan.events_used.push(layout.signature.clone());
                    plans.push((layout, roles));
                }
                None => scan.events_skipped.push(layout.signature.clone()),
            }
        }
        if plans.is_empty() {
            scan.no_delegation_events = true;
            return Ok(scan);
        }

        let mut kinds = KindCache::new(self.chain, range.end_block);
        for (layout, roles) in plans {
            for log in fetch_logs(self.chain, token, range, Some(layout.topic))? {
                let decoded = match decode_event(&log, layout) {
                    Ok(d) => d,
                    Err(e) => {
                        scan.failures.push(LogFailure::at(&log, e.to_string()));
                        continue;
                    }
                };
                let pick = |i: usize| decoded.values[i].1.as_address();
                let (Some(delegator), Some(delegate)) = (pick(roles.delegator), pick(roles.delegate)) else {
                    scan.failures.push(LogFailure::at(&log, "delegation parties are not addresses"));
                    continue;
                };
                let delegator_kind = kinds.kind(delegator)?;
                let delegate_kind = kinds.kind(delegate)?;
                if !delegator_kind.is_contract() && !delegate_kind.is_contract() {
                    scan.eoa_only += 1;
                    continue;
                }
                scan.records.push(DelegationRecord {
                    token,
                    delegator,
                    delegate,
                    delegator_kind,
                    delegate_kind,
                    self_delegation: delegator == delegate,
                    block_number: log.block_number,
                    tx_index: log.tx_index,
                    log_index: log.log_index,
                });
            }
        }
        scan.records.sort_by_key(|r| (r.block_number, r.tx_index, r.log_index));
        Ok(scan)
    }
}

#[derive(Debug, Default)]
struct VoteRoles {
    proposal_id: Option<String>,
    support: Option<u8>,
    weight: Option<u128>,
}

impl VoteRoles {
    fn read(event: &DecodedEvent) -> Self {
        let is_uint = |ty: &AbiType| matches!(ty, AbiType::Uint(_));
        let proposal_id = event
            .find(|name, ty| is_uint(ty) && matches!(name, "proposalid" | "proposal" | "id"))
            .and_then(|v| match v {
                AbiValue::Uint(w) => Some(w.to_decimal()),
                _ => None,
            });
        let support =
            event.find(|name, ty| name == "support" && (is_uint(ty) || *ty == AbiType::Bool)).and_then(|v| match v {
                AbiValue::Bool(b) => Some(u8::from(*b)),
                v => v.as_u128().and_then(|n| u8::try_from(n).ok()),
            });
        let weight = event
            .find(|name, ty| is_uint(ty) && matches!(name, "votes" | "weight" | "votingpower" | "power" | "amount"))
            .and_then(AbiValue::as_u128);
        VoteRoles { proposal_id, support, weight }
    }
}

/// Parameter positions of the two parties in a delegation event.
#[derive(Debug, Clone, Copy)]
struct DelegationRoles {
    delegator: usize,
    delegate: usize,
}

impl DelegationRoles {
    fn of(layout: &EventLayout) -> Option<Self> {
        let names: Vec<(usize, String)> = layout
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.ty == AbiType::Address)
            .map(|(i, p)| (i, p.name.trim_start_matches('_').to_ascii_lowercase()))
            .collect();
        let delegator = names.iter().find(|(_, n)| n.contains("delegator")).map(|(i, _)| *i)?;
        let delegate = names
            .iter()
            .filter(|(i, _)| *i != delegator)
            .find(|(_, n)| n.contains("delegate") && !n.starts_with("from"))
            .map(|(i, _)| *i)?;
        Some(DelegationRoles { delegator, delegate })
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abidec::Word;
    use crate::chainio::FixtureChain;

    fn addr(n: u64) -> Address {
        Address::from_low_u64(n)
    }

    fn vote_cast() -> EventLayout {
        EventLayout::from_declaration(
            "VoteCast(address indexed voter, uint256 proposalId, uint8 support, uint256 votes, string reason)",
        )
        .unwrap()
    }

    fn cast(chain: &mut FixtureChain, gov: Address, voter: Address, proposal: u128, support: u8, votes: u128) {
        let values = [
            AbiValue::Address(voter),
            AbiValue::Uint(Word::from_u128(proposal)),
            AbiValue::Uint(Word::from_u128(support as u128)),
            AbiValue::Uint(Word::from_u128(votes)),
            AbiValue::String(String::new()),
        ];
        chain.emit(gov, &vote_cast(), &values).unwrap();
    }

    fn scanner_parts() -> (SignatureStore, KeywordPolicy) {
        (SignatureStore::with_builtin(), KeywordPolicy::default())
    }

    #[test]
    fn most_frequent_topic_is_the_voting_event() {
        let gov = addr(1);
        let mut chain = FixtureChain::new();
        let created = EventLayout::from_declaration("ProposalCreated(uint256 id)").unwrap();
        let executed = EventLayout::from_declaration("ProposalExecuted(uint256 id)").unwrap();
        chain.set_abi_from(gov, &[&vote_cast(), &created, &executed], &[]).unwrap();
        for i in 0..120 {
            cast(&mut chain, gov, addr(100 + i % 7), 1, 1, 10);
        }
        for i in 0..9 {
            chain.emit(gov, &created, &[AbiValue::Uint(Word::from_u128(i))]).unwrap();
            chain.emit(gov, &executed, &[AbiValue::Uint(Word::from_u128(i))]).unwrap();
        }
        let (store, policy) = scanner_parts();
        let sel = VoterScanner::new(&chain, &store, &policy).select_voting_event(gov, chain.full_range()).unwrap();
        assert_eq!(sel.topic, Some(vote_cast().topic));
        assert_eq!(sel.frequency_table[0].1, 120);
        assert_eq!(sel.total_logs(), 138);
        assert!(sel.tied.is_empty());
        assert_eq!(sel.layout.unwrap().signature, vote_cast().signature);
    }

    #[test]
    fn tie_goes_to_lower_topic() {
        let gov = addr(1);
        let mut chain = FixtureChain::new();
        let a = EventLayout::from_declaration("Alpha(uint256 x)").unwrap();
        let b = EventLayout::from_declaration("Beta(uint256 x)").unwrap();
        for _ in 0..3 {
            chain.emit(gov, &a, &[AbiValue::Uint(Word::from_u128(1))]).unwrap();
            chain.emit(gov, &b, &[AbiValue::Uint(Word::from_u128(1))]).unwrap();
        }
        let (store, policy) = scanner_parts();
        let sel = VoterScanner::new(&chain, &store, &policy).select_voting_event(gov, chain.full_range()).unwrap();
        let lower = a.topic.min(b.topic);
        assert_eq!(sel.topic, Some(lower));
        assert_eq!(sel.tied.len(), 2);
        assert!(sel.layout.is_none());
    }

    #[test]
    fn empty_governor_gives_empty_selection() {
        let chain = FixtureChain::new();
        let (store, policy) = scanner_parts();
        let s = VoterScanner::new(&chain, &store, &policy);
        let range = ScanRange::new(0, 10).unwrap();
        assert!(s.select_voting_event(addr(1), range).unwrap().is_empty());
        assert!(s.identify_multisig_voters(addr(1), range).unwrap().is_empty());
    }

    #[test]
    fn only_contract_voters_survive() {
        let gov = addr(1);
        let (eoa1, eoa2, safe, treasury) = (addr(10), addr(11), addr(20), addr(21));
        let mut chain = FixtureChain::new();
        chain.set_abi_from(gov, &[&vote_cast()], &[]).unwrap();
        chain.add_contract(safe);
        chain.add_contract(treasury);
        for v in [eoa1, eoa2, safe, treasury] {
            cast(&mut chain, gov, v, 1, 1, 5);
        }
        for _ in 0..29 {
            cast(&mut chain, gov, safe, 2, 0, 5);
        }
        let (store, policy) = scanner_parts();
        let s = VoterScanner::new(&chain, &store, &policy);
        let range = chain.full_range();
        let voters = s.identify_multisig_voters(gov, range).unwrap();
        assert_eq!(voters, BTreeSet::from([safe, treasury]));
        let scan = s.extract_vote_records(gov, range).unwrap();
        assert_eq!(scan.records.len(), 33);
        let first = &scan.records[0];
        assert_eq!((first.proposal_id.as_deref(), first.support, first.weight), (Some("1"), Some(1), Some(5)));
    }

    #[test]
    fn scavenging_without_abi_and_missing_weight() {
        let gov = addr(1);
        let safe = addr(30);
        let mut chain = FixtureChain::new();
        chain.add_contract(safe);
        let bare = EventLayout::from_declaration("Voted(address who, uint256 proposal, bool support)").unwrap();
        chain
            .emit(gov, &bare, &[AbiValue::Address(safe), AbiValue::Uint(Word::from_u128(7)), AbiValue::Bool(true)])
            .unwrap();
        let (store, policy) = scanner_parts();
        let s = VoterScanner::new(&chain, &store, &policy);
        let scan = s.extract_vote_records(gov, chain.full_range()).unwrap();
        assert_eq!(scan.records.len(), 1);
        assert_eq!(scan.records[0].voter, safe);
        assert_eq!(scan.records[0].weight, None);
        assert_eq!(scan.records[0].support, None);

        chain.set_abi_from(gov, &[&bare], &[]).unwrap();
        let s = VoterScanner::new(&chain, &store, &policy);
        let scan = s.extract_vote_records(gov, chain.full_range()).unwrap();
        assert_eq!(scan.records[0].voter, safe);
        assert_eq!(scan.records[0].support, Some(1));
        assert_eq!(scan.records[0].weight, None);
    }

    fn delegate_changed() -> EventLayout {
        EventLayout::from_declaration(
            "DelegateChanged(address indexed delegator, address indexed fromDelegate, address indexed toDelegate)",
        )
        .unwrap()
    }

    #[test]
    fn delegations_keep_contract_parties_and_flag_self() {
        let token = addr(1);
        let mut chain = FixtureChain::new();
        let votes_changed = EventLayout::from_declaration(
            "DelegateVotesChanged(address indexed delegate, uint256 previousBalance, uint256 newBalance)",
        )
        .unwrap();
        chain.set_abi_from(token, &[&delegate_changed(), &votes_changed], &["delegate(address)"]).unwrap();
        let (dao_a, dao_b, dao_c, eoa1, eoa2, eoa3) = (addr(50), addr(51), addr(52), addr(60), addr(61), addr(62));
        for c in [dao_a, dao_b, dao_c] {
            chain.add_contract(c);
        }
        let pairs =
            [(dao_a, dao_a), (dao_b, dao_b), (dao_c, eoa1), (eoa1, dao_a), (eoa2, eoa3), (eoa2, eoa2), (dao_a, dao_b)];
        for (from, to) in pairs {
            chain
                .emit(
                    token,
                    &delegate_changed(),
                    &[AbiValue::Address(from), AbiValue::Address(Address::ZERO), AbiValue::Address(to)],
                )
                .unwrap();
        }
        let (store, policy) = scanner_parts();
        let scan = VoterScanner::new(&chain, &store, &policy).resolve_delegations(token, chain.full_range()).unwrap();
        assert_eq!(scan.records.len(), 5);
        assert_eq!(scan.eoa_only, 2);
        assert_eq!(scan.records.iter().filter(|r| r.self_delegation).count(), 2);
        assert!(scan.records.iter().all(|r| r.delegator_kind.is_contract() || r.delegate_kind.is_contract()));
        assert_eq!(scan.events_used, vec![delegate_changed().signature]);
        assert_eq!(scan.events_skipped, vec![votes_changed.signature]);
    }

    #[test]
    fn delegation_flags_without_abi_or_events() {
        let token = addr(1);
        let mut chain = FixtureChain::new();
        let (store, policy) = scanner_parts();
        let range = ScanRange::new(0, 10).unwrap();
        let scan = VoterScanner::new(&chain, &store, &policy).resolve_delegations(token, range).unwrap();
        assert!(scan.no_abi && scan.records.is_empty());

        let transfer =
            EventLayout::from_declaration("Transfer(address indexed from, address indexed to, uint256 value)").unwrap();
        chain.set_abi_from(token, &[&transfer], &[]).unwrap();
        let scan = VoterScanner::new(&chain, &store, &policy).resolve_delegations(token, range).unwrap();
        assert!(!scan.no_abi && scan.no_delegation_events);
    }

    #[test]
    fn records_round_trip_as_jsonl() {
        let rec = VoteRecord {
            governor: addr(1),
            voter: addr(2),
            voter_kind: AccountKind::Contract,
            proposal_id: Some("100".into()),
            support: Some(0),
            weight: Some(50_007),
            block_number: 3,
            tx_index: 0,
            log_index: 1,
        };
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&rec), &mut buf).unwrap();
        let back: Vec<VoteRecord> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }
}
