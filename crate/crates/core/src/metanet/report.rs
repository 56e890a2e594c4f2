//! Analytics over the network and its vote records.

use std::collections::{BTreeMap, BTreeSet};

use regex::RegexBuilder;
use serde::Serialize;

use super::{EdgeKind, EvidenceRef, MetagovNetwork};
use crate::model::{AccountKind, Address};
use crate::snapshotio::ProposalText;
use crate::voterscan::VoteRecord;

/// Shares strictly above this are flagged as large.
pub const SHARE_FLAG_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeRow {
    pub dao_id: String,
    pub in_degree: usize,
    pub out_degree: usize,
}

/// Degrees over distinct (source, target) pairs, ignoring edge kind.
/// Sorted by in-degree descending, then id.
pub fn degree_report(net: &MetagovNetwork) -> Vec<DegreeRow> {
    let pairs: BTreeSet<(&str, &str)> = net.edges().map(|e| (e.source.as_str(), e.target.as_str())).collect();
    let mut rows: BTreeMap<&str, DegreeRow> = net
        .vertices()
        .map(|v| (v.id.as_str(), DegreeRow { dao_id: v.id.clone(), in_degree: 0, out_degree: 0 }))
        .collect();
    for (s, t) in pairs {
        if let Some(r) = rows.get_mut(s) {
            r.out_degree += 1;
        }
        if let Some(r) = rows.get_mut(t) {
            r.in_degree += 1;
        }
    }
    let mut out: Vec<DegreeRow> = rows.into_values().collect();
    out.sort_by(|a, b| b.in_degree.cmp(&a.in_degree).then_with(|| a.dao_id.cmp(&b.dao_id)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareRow {
    pub source: String,
    pub target: String,
    pub governor: Address,
    pub proposal_id: String,
    pub voter: Address,
    pub voter_weight: u128,
    pub total_weight: u128,
    pub share: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedProposal {
    pub governor: Address,
    pub proposal_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShareReport {
    pub rows: Vec<ShareRow>,
    pub skipped: Vec<SkippedProposal>,
}

/// Each voter's share of the weight cast on one proposal, merging repeat
/// votes by the same voter. Fails if any vote lacks a weight or the total
/// is zero.
pub fn proposal_shares(votes: &[&VoteRecord]) -> Result<Vec<(Address, u128, u128, f64)>, String> {
    let mut per_voter: BTreeMap<Address, u128> = BTreeMap::new();
    for v in votes {
        let w = v.weight.ok_or_else(|| format!("vote by {} has no weight", v.voter))?;
        let slot = per_voter.entry(v.voter).or_insert(0);
        *slot = slot.checked_add(w).ok_or("weight overflow")?;
    }
    let total = per_voter.values().try_fold(0u128, |acc, w| acc.checked_add(*w)).ok_or("weight overflow")?;
    if total == 0 {
        return Err("total weight is zero".into());
    }
    Ok(per_voter.into_iter().map(|(voter, w)| (voter, w, total, w as f64 / total as f64)).collect())
}

fn by_proposal(votes: &[VoteRecord]) -> BTreeMap<(Address, String), Vec<&VoteRecord>> {
    let mut out: BTreeMap<(Address, String), Vec<&VoteRecord>> = BTreeMap::new();
    for v in votes {
        if let Some(p) = &v.proposal_id {
            out.entry((v.governor, p.clone())).or_default().push(v);
        }
    }
    out
}

/// Shares of every voter that backs an on-chain vote edge, per proposal
/// they voted on. Proposals with missing weights are skipped with a note.
pub fn share_report(net: &MetagovNetwork, votes: &[VoteRecord]) -> ShareReport {
    let mut wanted: BTreeMap<(Address, String, Address), (String, String)> = BTreeMap::new();
    for e in net.edges().filter(|e| e.kind == EdgeKind::OnChainVote) {
        for ev in &e.evidence {
            if let EvidenceRef::Vote { governor, voter, proposal_id: Some(p), .. } = ev {
                wanted.insert((*governor, p.clone(), *voter), (e.source.clone(), e.target.clone()));
            }
        }
    }
    let mut report = ShareReport::default();
    for ((governor, proposal_id), pv) in by_proposal(votes) {
        let relevant: Vec<_> = wanted
            .range((governor, proposal_id.clone(), Address::ZERO)..)
            .take_while(|((g, p, _), _)| *g == governor && *p == proposal_id)
            .collect();
        if relevant.is_empty() {
            continue;
        }
        let shares = match proposal_shares(&pv) {
            Ok(s) => s,
            Err(reason) => {
                report.skipped.push(SkippedProposal { governor, proposal_id, reason });
                continue;
            }
        };
        for ((_, _, voter), (source, target)) in relevant {
            let Some((_, w, total, share)) = shares.iter().find(|(a, ..)| a == voter) else { continue };
            report.rows.push(ShareRow {
                source: source.clone(),
                target: target.clone(),
                governor,
                proposal_id: proposal_id.clone(),
                voter: *voter,
                voter_weight: *w,
                total_weight: *total,
                share: *share,
                flagged: *share > SHARE_FLAG_THRESHOLD,
            });
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Side {
    Against,
    For,
    Abstain,
}

impl Side {
    /// 0 against, 1 for, 2 abstain.
    pub fn from_support(support: u8) -> Option<Side> {
        match support {
            0 => Some(Side::Against),
            1 => Some(Side::For),
            2 => Some(Side::Abstain),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub for_votes: u128,
    pub against_votes: u128,
    pub abstain_votes: u128,
}

impl Tally {
    fn side_mut(&mut self, side: Side) -> &mut u128 {
        match side {
            Side::For => &mut self.for_votes,
            Side::Against => &mut self.against_votes,
            Side::Abstain => &mut self.abstain_votes,
        }
    }

    pub fn without(&self, side: Side, weight: u128) -> Tally {
        let mut t = *self;
        let slot = t.side_mut(side);
        *slot = slot.saturating_sub(weight);
        t
    }
}

pub trait ThresholdRule {
    fn passes(&self, tally: &Tally) -> bool;
}

/// Passes when for-votes strictly exceed against-votes; a tie fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleMajority;

impl ThresholdRule for SimpleMajority {
    fn passes(&self, t: &Tally) -> bool {
        t.for_votes > t.against_votes
    }
}

/// A strict majority that also needs `quorum` weight in favour, counting
/// abstentions toward quorum when `abstain_counts` is set.
#[derive(Debug, Clone, Copy)]
pub struct QuorumMajority {
    pub quorum: u128,
    pub abstain_counts: bool,
}

impl ThresholdRule for QuorumMajority {
    fn passes(&self, t: &Tally) -> bool {
        let turnout = if self.abstain_counts { t.for_votes.saturating_add(t.abstain_votes) } else { t.for_votes };
        t.for_votes > t.against_votes && turnout >= self.quorum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Passed,
    Rejected,
}

impl Outcome {
    fn of(rule: &dyn ThresholdRule, t: &Tally) -> Self {
        if rule.passes(t) {
            Outcome::Passed
        } else {
            Outcome::Rejected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoterImpact {
    pub voter: Address,
    pub side: Side,
    pub weight: u128,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisiveReport {
    pub governor: Option<Address>,
    pub proposal_id: Option<String>,
    pub tally: Tally,
    pub outcome: Outcome,
    /// Contract-account voters and whether removing each flips the outcome.
    pub contract_voters: Vec<VoterImpact>,
    pub pivotal_voter: Option<Address>,
    pub pivotal_weight: Option<u128>,
    pub flipped: bool,
    /// Votes left out of the tally: missing weight or unknown support.
    pub ignored_votes: usize,
}

/// Tallies one proposal's votes and tests, for every contract-account
/// voter, whether removing its weight changes the outcome under `rule`.
/// The pivotal voter is the heaviest such voter, ties to the lower address.
pub fn decisive_report(votes: &[VoteRecord], rule: &dyn ThresholdRule) -> DecisiveReport {
    let mut tally = Tally::default();
    let mut contract: BTreeMap<(Address, Side), u128> = BTreeMap::new();
    let mut ignored = 0;
    for v in votes {
        let (Some(weight), Some(side)) = (v.weight, v.support.and_then(Side::from_support)) else {
            ignored += 1;
            continue;
        };
        let slot = tally.side_mut(side);
        *slot = slot.saturating_add(weight);
        if v.voter_kind == AccountKind::Contract {
            *contract.entry((v.voter, side)).or_insert(0) += weight;
        }
    }
    let outcome = Outcome::of(rule, &tally);
    let contract_voters: Vec<VoterImpact> = contract
        .into_iter()
        .map(|((voter, side), weight)| VoterImpact {
            voter,
            side,
            weight,
            flipped: Outcome::of(rule, &tally.without(side, weight)) != outcome,
        })
        .collect();
    let pivotal =
        contract_voters.iter().filter(|i| i.flipped).max_by(|a, b| a.weight.cmp(&b.weight).then(b.voter.cmp(&a.voter)));
    DecisiveReport {
        governor: votes.first().map(|v| v.governor),
        proposal_id: votes.first().and_then(|v| v.proposal_id.clone()),
        tally,
        outcome,
        pivotal_voter: pivotal.map(|p| p.voter),
        pivotal_weight: pivotal.map(|p| p.weight),
        flipped: pivotal.is_some(),
        contract_voters,
        ignored_votes: ignored,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionTarget {
    pub dao_id: String,
    /// Names to look for; matched case-insensitively as whole words.
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MentionRow {
    pub source: String,
    pub target: String,
    /// Proposals of the source that name the target at least once.
    pub mention_count: usize,
    /// Vote evidence on edges from the source to the target.
    pub vote_count: usize,
}

/// Pairs how often a DAO's proposals name other DAOs with how often it
/// actually voted in them.
pub fn mention_report(
    net: &MetagovNetwork,
    source: &str,
    proposals: &[ProposalText],
    targets: &[MentionTarget],
) -> Vec<MentionRow> {
    targets
        .iter()
        .map(|t| {
            let alternatives: Vec<String> =
                t.names.iter().filter(|n| !n.trim().is_empty()).map(|n| regex::escape(n.trim())).collect();
            let mention_count = if alternatives.is_empty() {
                0
            } else {
                let re = RegexBuilder::new(&format!(r"\b(?:{})\b", alternatives.join("|")))
                    .case_insensitive(true)
                    .build()
                    .expect("escaped names form a valid pattern");
                proposals.iter().filter(|p| re.is_match(&p.title) || re.is_match(&p.body)).count()
            };
            let vote_count = [EdgeKind::OnChainVote, EdgeKind::OffChainVote]
                .into_iter()
                .filter_map(|k| net.edge(source, &t.dao_id, k))
                .map(|e| e.evidence.len())
                .sum();
            MentionRow { source: source.to_owned(), target: t.dao_id.clone(), mention_count, vote_count }
        })
        .collect()
}
