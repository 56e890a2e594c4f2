//! Desk-scale governance worlds: synthetic chains, Snapshot data, name tags
//! and seed lists reproducing documented metagovernance situations.
//!
//! On-chain vote weights are in 18-decimal token units (see [`tokens`]).

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::json;

use crate::abidec::{AbiValue, EventLayout, Word};
use crate::chainio::{CodeSpan, FixtureChain, ScanRange};
use crate::labeler::{FixtureTags, LocalOverrides};
use crate::model::{keccak256, Address, CallType, DaoIdentity, DaoSource, EventLogRecord, TopicHash};
use crate::pipeline::{self, PipelineError};
use crate::snapshotio::SnapshotFixture;

pub const TOKEN_UNIT: u128 = 1_000_000_000_000_000_000;

/// Whole tokens in base units.
pub fn tokens(n: u128) -> u128 {
    n * TOKEN_UNIT
}

/// A stable address derived from a label.
pub fn named(label: &str) -> Address {
    let h = keccak256(format!("metagov fixture {label}"));
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&h[12..]);
    Address::new(bytes)
}

pub const BRAVO_VOTE_CAST: &str =
    "VoteCast(address indexed voter, uint256 proposalId, uint8 support, uint256 votes, string reason)";
pub const BRAVO_PROPOSAL_CREATED: &str = "ProposalCreated(uint256 id, address proposer, address[] targets, uint256[] values, string[] signatures, bytes[] calldatas, uint256 startBlock, uint256 endBlock, string description)";
pub const BRAVO_PROPOSAL_EXECUTED: &str = "ProposalExecuted(uint256 id)";
pub const AAVE_VOTE_EMITTED: &str = "VoteEmitted(uint256 id, address indexed voter, bool support, uint256 votingPower)";
pub const AAVE_PROPOSAL_CREATED: &str =
    "ProposalCreated(uint256 id, address indexed creator, address indexed executor, uint256 startBlock, uint256 endBlock)";
pub const AAVE_PROPOSAL_EXECUTED: &str = "ProposalExecuted(uint256 id, address indexed initiatorExecution)";
pub const COMP_DELEGATE_CHANGED: &str =
    "DelegateChanged(address indexed delegator, address indexed fromDelegate, address indexed toDelegate)";
pub const COMP_DELEGATE_VOTES_CHANGED: &str =
    "DelegateVotesChanged(address indexed delegate, uint256 previousBalance, uint256 newBalance)";
pub const AAVE_DELEGATE_CHANGED: &str =
    "DelegateChanged(address indexed delegator, address indexed delegatee, uint8 delegationType)";
pub const TRANSFER: &str = "Transfer(address indexed from, address indexed to, uint256 value)";

fn layout(decl: &str) -> EventLayout {
    EventLayout::from_declaration(decl).expect("fixture declarations parse")
}

fn uint(n: u128) -> AbiValue {
    AbiValue::Uint(Word::from_u128(n))
}

/// The governor contract family a DAO uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GovernorStyle {
    /// Compound Governor Bravo events, Compound-style token delegation.
    Bravo,
    /// Aave governance v2 events, Aave-style token delegation.
    AaveV2,
}

/// Contracts deployed for one DAO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaoContracts {
    pub id: String,
    pub token: Address,
    pub governor: Option<Address>,
    pub style: GovernorStyle,
}

impl DaoContracts {
    fn governor(&self) -> Address {
        self.governor.unwrap_or_else(|| panic!("{} has no governor", self.id))
    }
}

/// A complete offline world: chain, Snapshot hub, name tags, overrides,
/// seed list and a directory of DAOs that expansion may scan.
#[derive(Debug, Clone)]
pub struct World {
    pub chain: FixtureChain,
    pub snapshot: SnapshotFixture,
    pub tags: FixtureTags,
    pub overrides: LocalOverrides,
    pub seed: Vec<DaoIdentity>,
    pub directory: Vec<DaoIdentity>,
    clock: u64,
}

impl Default for World {
    fn default() -> Self {
        Self::new()
    }
}

impl World {
    pub fn new() -> Self {
        World {
            chain: FixtureChain::new(),
            snapshot: SnapshotFixture::default(),
            tags: FixtureTags::new(),
            overrides: LocalOverrides::new(),
            seed: Vec::new(),
            directory: Vec::new(),
            clock: 1_650_000_000,
        }
    }

    pub fn range(&self) -> ScanRange {
        self.chain.full_range()
    }

    /// A contract with placeholder code and no verified ABI.
    pub fn contract(&mut self, label: &str) -> Address {
        let a = named(label);
        self.chain.add_contract(a);
        a
    }

    /// A contract that is tagged on the explorer.
    pub fn tagged_contract(&mut self, label: &str, tag: &str) -> Address {
        let a = self.contract(label);
        self.tags.insert(a, tag);
        a
    }

    pub fn token(&mut self, id: &str, style: GovernorStyle) -> Address {
        let token = self.contract(&format!("{id} token"));
        let transfer = layout(TRANSFER);
        let result = match style {
            GovernorStyle::Bravo => self.chain.set_abi_from(
                token,
                &[&transfer, &layout(COMP_DELEGATE_CHANGED), &layout(COMP_DELEGATE_VOTES_CHANGED)],
                &[
                    "transfer(address,uint256)",
                    "balanceOf(address)",
                    "delegate(address)",
                    "getPriorVotes(address,uint256)",
                ],
            ),
            GovernorStyle::AaveV2 => self.chain.set_abi_from(
                token,
                &[&transfer, &layout(AAVE_DELEGATE_CHANGED)],
                &[
                    "transfer(address,uint256)",
                    "balanceOf(address)",
                    "delegate(address)",
                    "getPowerCurrent(address,uint8)",
                ],
            ),
        };
        result.expect("token ABI builds");
        token
    }

    pub fn governor(&mut self, id: &str, style: GovernorStyle) -> Address {
        let governor = self.contract(&format!("{id} governor"));
        let result = match style {
            GovernorStyle::Bravo => self.chain.set_abi_from(
                governor,
                &[&layout(BRAVO_VOTE_CAST), &layout(BRAVO_PROPOSAL_CREATED), &layout(BRAVO_PROPOSAL_EXECUTED)],
                &["castVote(uint256,uint8)", "castVoteWithReason(uint256,uint8,string)", "execute(uint256)"],
            ),
            GovernorStyle::AaveV2 => self.chain.set_abi_from(
                governor,
                &[&layout(AAVE_VOTE_EMITTED), &layout(AAVE_PROPOSAL_CREATED), &layout(AAVE_PROPOSAL_EXECUTED)],
                &["submitVote(uint256,bool)", "execute(uint256)", "getVotingDelay()"],
            ),
        };
        result.expect("governor ABI builds");
        governor
    }

    /// A DEX router: verified, busy, and nothing to do with governance.
    pub fn router(&mut self, id: &str) -> Address {
        let router = self.contract(&format!("{id} router"));
        self.chain
            .set_abi_from(
                router,
                &[&layout("Swap(address indexed sender, uint256 amountIn, uint256 amountOut, address indexed to)")],
                &[
                    "swapExactTokensForTokens(uint256,uint256,address[],address,uint256)",
                    "getAmountsOut(uint256,address[])",
                ],
            )
            .expect("router ABI builds");
        router
    }

    /// Background traffic on a token: a router and a holder account.
    fn token_noise(&mut self, id: &str, token: Address) {
        let router = self.router(id);
        self.chain.add_calls(router, token, CallType::Call, 120);
        self.chain.add_calls(named(&format!("{id} holder")), token, CallType::Call, 300);
    }

    /// Token plus governor; the governor reads voting power from the token.
    pub fn governed_dao(&mut self, id: &str, style: GovernorStyle) -> DaoContracts {
        let token = self.token(id, style);
        let governor = self.governor(id, style);
        self.chain.add_calls(governor, token, CallType::StaticCall, 40);
        self.token_noise(id, token);
        DaoContracts { id: id.to_owned(), token, governor: Some(governor), style }
    }

    /// A token without on-chain governance.
    pub fn token_only_dao(&mut self, id: &str, style: GovernorStyle) -> DaoContracts {
        let token = self.token(id, style);
        self.token_noise(id, token);
        DaoContracts { id: id.to_owned(), token, governor: None, style }
    }

    pub fn propose(&mut self, dao: &DaoContracts, proposal: u64) {
        let g = dao.governor();
        let proposer = named(&format!("{} proposer", dao.id));
        let result = match dao.style {
            GovernorStyle::Bravo => self.chain.emit(
                g,
                &layout(BRAVO_PROPOSAL_CREATED),
                &[
                    uint(proposal as u128),
                    AbiValue::Address(proposer),
                    AbiValue::Array(vec![AbiValue::Address(dao.token)]),
                    AbiValue::Array(vec![uint(0)]),
                    AbiValue::Array(vec![AbiValue::String("_setVotingPeriod(uint256)".into())]),
                    AbiValue::Array(vec![AbiValue::Bytes(vec![0; 32])]),
                    uint(100),
                    uint(20_000),
                    AbiValue::String(format!("# Proposal {proposal}")),
                ],
            ),
            GovernorStyle::AaveV2 => self.chain.emit(
                g,
                &layout(AAVE_PROPOSAL_CREATED),
                &[
                    uint(proposal as u128),
                    AbiValue::Address(proposer),
                    AbiValue::Address(named("aave executor")),
                    uint(100),
                    uint(20_000),
                ],
            ),
        };
        result.expect("proposal encodes");
    }

    pub fn execute(&mut self, dao: &DaoContracts, proposal: u64) {
        let g = dao.governor();
        let result = match dao.style {
            GovernorStyle::Bravo => self.chain.emit(g, &layout(BRAVO_PROPOSAL_EXECUTED), &[uint(proposal as u128)]),
            GovernorStyle::AaveV2 => self.chain.emit(
                g,
                &layout(AAVE_PROPOSAL_EXECUTED),
                &[uint(proposal as u128), AbiValue::Address(named("aave guardian"))],
            ),
        };
        result.expect("execution encodes");
    }

    /// One on-chain vote. `support` is 0 against, 1 for, 2 abstain; Aave
    /// style governors record only for or against.
    pub fn vote(
        &mut self,
        dao: &DaoContracts,
        voter: Address,
        proposal: u64,
        support: u8,
        weight: u128,
    ) -> EventLogRecord {
        let g = dao.governor();
        let result = match dao.style {
            GovernorStyle::Bravo => self.chain.emit(
                g,
                &layout(BRAVO_VOTE_CAST),
                &[
                    AbiValue::Address(voter),
                    uint(proposal as u128),
                    uint(support as u128),
                    uint(weight),
                    AbiValue::String(String::new()),
                ],
            ),
            GovernorStyle::AaveV2 => self.chain.emit(
                g,
                &layout(AAVE_VOTE_EMITTED),
                &[uint(proposal as u128), AbiValue::Address(voter), AbiValue::Bool(support == 1), uint(weight)],
            ),
        };
        result.expect("vote encodes")
    }

    pub fn delegate(&mut self, dao: &DaoContracts, delegator: Address, delegate: Address) {
        let result = match dao.style {
            GovernorStyle::Bravo => self.chain.emit(
                dao.token,
                &layout(COMP_DELEGATE_CHANGED),
                &[AbiValue::Address(delegator), AbiValue::Address(Address::ZERO), AbiValue::Address(delegate)],
            ),
            GovernorStyle::AaveV2 => self.chain.emit(
                dao.token,
                &layout(AAVE_DELEGATE_CHANGED),
                &[AbiValue::Address(delegator), AbiValue::Address(delegate), uint(0)],
            ),
        };
        result.expect("delegation encodes");
    }

    pub fn space(&mut self, id: &str, followers: u64, addresses: &[Address]) {
        self.snapshot.add_space(id, followers, addresses);
    }

    /// An off-chain vote at the next tick of the Snapshot clock.
    pub fn offchain_vote(&mut self, space: &str, proposal: &str, voter: Address, choice: u64, vp: f64) {
        self.clock += 60;
        self.snapshot.add_vote(space, proposal, voter, json!(choice), vp, self.clock);
    }

    pub fn offchain_proposal(&mut self, space: &str, id: &str, title: &str, body: &str) {
        self.snapshot.add_proposal(space, id, title, body);
    }

    fn identity(dao: &DaoContracts, name: &str, space: Option<&str>, source: DaoSource) -> DaoIdentity {
        DaoIdentity::new(&dao.id, name, Some(dao.token), None, space.map(str::to_owned), source).expect("token handle")
    }

    pub fn seed_dao(&mut self, dao: &DaoContracts, name: &str, space: Option<&str>) {
        self.seed.push(Self::identity(dao, name, space, DaoSource::SeedList));
    }

    pub fn list_dao(&mut self, dao: &DaoContracts, name: &str, space: Option<&str>) {
        self.directory.push(Self::identity(dao, name, space, DaoSource::Expansion));
    }

    /// Writes the world as a fixture directory readable by the pipeline.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        pipeline::write_fixture_dir(dir, self)
    }
}

/// A governor with modest traffic to its token, against a busier router
/// and busier unverified callers.
#[derive(Debug, Clone)]
pub struct GovernorTokenCase {
    pub chain: FixtureChain,
    pub token: Address,
    pub governor: Address,
    pub router: Address,
    pub unverified: Address,
}

pub fn governor_token() -> GovernorTokenCase {
    let mut w = World::new();
    let token = w.token("gt", GovernorStyle::Bravo);
    let governor = w.governor("gt", GovernorStyle::Bravo);
    let router = w.router("gt");
    let unverified = w.contract("gt arbitrage bot");
    w.chain.add_calls(governor, token, CallType::StaticCall, 50);
    w.chain.add_calls(router, token, CallType::Call, 400);
    w.chain.add_calls(unverified, token, CallType::Call, 700);
    w.chain.add_calls(named("gt holder"), token, CallType::Call, 1000);
    w.chain.add_calls(token, token, CallType::Call, 2000);
    w.chain.add_call(named("gt deployer"), token, CallType::Create);
    GovernorTokenCase { chain: w.chain, token, governor, router, unverified }
}

/// A token governed off-chain whose vote-escrow locker calls it far more
/// often than anything else and exposes a vote-flavoured ABI. The
/// heuristic names the locker as the governor: a false positive.
#[derive(Debug, Clone)]
pub struct LockerShadowCase {
    pub chain: FixtureChain,
    pub token: Address,
    pub locker: Address,
    pub router: Address,
    /// Where governance actually happens.
    pub snapshot_space: &'static str,
}

pub fn locker_shadow() -> LockerShadowCase {
    let mut w = World::new();
    let token = w.contract("yfi token");
    w.chain
        .set_abi_from(
            token,
            &[&layout(TRANSFER)],
            &["transfer(address,uint256)", "transferFrom(address,address,uint256)", "balanceOf(address)"],
        )
        .expect("token ABI builds");
    let locker = w.contract("yfi locker");
    w.chain
        .set_abi_from(
            locker,
            &[
                &layout("ModifyLock(address indexed sender, address indexed user, uint256 amount, uint256 locktime)"),
                &layout("Withdraw(address indexed user, uint256 amount, uint256 penalty)"),
            ],
            &[
                "modify_lock(uint256,uint256,address)",
                "withdraw()",
                "balanceOf(address)",
                "getPriorVotes(address,uint256)",
            ],
        )
        .expect("locker ABI builds");
    let router = w.router("yfi");
    w.chain.add_calls(locker, token, CallType::Call, 900);
    w.chain.add_calls(router, token, CallType::Call, 300);
    w.chain.add_calls(named("yfi holder"), token, CallType::Call, 2000);
    LockerShadowCase { chain: w.chain, token, locker, router, snapshot_space: "ybaby.eth" }
}

/// A governor with 120 votes, 9 proposals created and 9 executed, and a
/// manifest of which voters are contracts at the end of the range.
#[derive(Debug, Clone)]
pub struct VotingCase {
    pub chain: FixtureChain,
    pub governor: Address,
    pub vote_topic: TopicHash,
    pub range: ScanRange,
    /// Voters with code at the end of the range.
    pub contract_voters: BTreeSet<Address>,
    pub eoa_voters: BTreeSet<Address>,
    /// A contract voter whose code was removed before the range ended.
    pub retired: Address,
    pub anonymous_logs: u64,
}

pub fn voting_governor() -> VotingCase {
    let mut w = World::new();
    let dao = w.governed_dao("vg", GovernorStyle::Bravo);
    let governor = dao.governor();
    let mut eoas: Vec<Address> = ["EOA1", "EOA2"].iter().map(|l| named(&format!("vg {l}"))).collect();
    eoas.extend((3..=10).map(|i| named(&format!("vg EOA{i}"))));
    let contracts: Vec<Address> =
        ["Safe1", "Safe2", "DaoTreasury1", "DaoTreasury2"].iter().map(|l| w.contract(&format!("vg {l}"))).collect();
    let retired = named("vg Retired");
    w.chain.add_code_span(retired, CodeSpan { code: vec![0x60, 0x80], from_block: 0, until_block: Some(5) });

    let voters: Vec<Address> = contracts.iter().chain(eoas.iter()).copied().chain([retired]).collect();
    for p in 1..=9 {
        w.propose(&dao, p);
    }
    let mut cast = 0;
    'outer: for p in 1..=9u64 {
        for (i, v) in voters.iter().enumerate() {
            if cast == 120 {
                break 'outer;
            }
            w.vote(&dao, *v, p, (i % 3) as u8, tokens(1_000 + i as u128));
            cast += 1;
        }
    }
    for p in 1..=9 {
        w.execute(&dao, p);
    }
    let anonymous_logs = 3;
    for i in 0..anonymous_logs {
        let block = w.chain.full_range().end_block;
        w.chain
            .add_log(EventLogRecord {
                emitter: governor,
                topics: vec![],
                data: vec![i as u8; 32],
                block_number: block,
                tx_index: 0,
                log_index: 0,
            })
            .expect("fresh position");
    }
    VotingCase {
        range: w.range(),
        chain: w.chain,
        governor,
        vote_topic: layout(BRAVO_VOTE_CAST).topic,
        contract_voters: contracts.into_iter().collect(),
        eoa_voters: eoas.into_iter().collect(),
        retired,
        anonymous_logs,
    }
}

/// Compound proposal 100: a university multisig casts the deciding
/// against-vote.
#[derive(Debug, Clone)]
pub struct DecisiveCase {
    pub world: World,
    pub dao: DaoContracts,
    pub proposal: u64,
    pub multisig: Address,
}

pub fn compound_proposal_100() -> DecisiveCase {
    let mut w = World::new();
    let dao = w.governed_dao("compound", GovernorStyle::Bravo);
    w.seed_dao(&dao, "Compound", None);
    let multisig = w.tagged_contract("berkeley multisig", "Blockchain at Berkeley: Multisig");
    w.propose(&dao, 99);
    w.propose(&dao, 100);
    for (label, support, weight) in [
        ("compound whale 1", 1, 300_000),
        ("compound whale 2", 1, 150_000),
        ("compound voter 3", 1, 42_678),
        ("compound whale 4", 0, 400_000),
        ("compound voter 5", 0, 49_842),
        ("compound voter 6", 2, 1_500),
    ] {
        w.vote(&dao, named(label), 100, support, tokens(weight));
    }
    w.vote(&dao, multisig, 100, 0, tokens(50_007));
    w.vote(&dao, named("compound whale 1"), 99, 1, tokens(300_000));
    w.vote(&dao, multisig, 99, 1, tokens(50_007));
    w.execute(&dao, 99);
    DecisiveCase { world: w, dao, proposal: 100, multisig }
}

/// Aave proposal 95: the Liquity bounty treasury votes for its own
/// listing with 100000 AAVE out of 588235 cast.
#[derive(Debug, Clone)]
pub struct ShareCase {
    pub world: World,
    pub dao: DaoContracts,
    pub proposal: u64,
    pub treasury: Address,
    pub total_tokens: u128,
}

pub fn liquity_on_aave() -> ShareCase {
    let mut w = World::new();
    let dao = w.governed_dao("aave", GovernorStyle::AaveV2);
    w.seed_dao(&dao, "Aave", None);
    let treasury = w.tagged_contract("liquity bounties", "Liquity: Bounties");
    w.propose(&dao, 95);
    w.vote(&dao, treasury, 95, 1, tokens(100_000));
    for (label, weight) in [("aave whale 1", 250_000), ("aave whale 2", 200_000), ("aave voter 3", 38_235)] {
        w.vote(&dao, named(label), 95, 1, tokens(weight));
    }
    w.execute(&dao, 95);
    ShareCase { world: w, dao, proposal: 95, treasury, total_tokens: 588_235 }
}

/// Delegations of one token scaled down from the mainnet funnel: 20
/// involving contracts, 7 of them self-delegations, 5 distinct DAO-to-DAO
/// pairs, 3 with a delegate that voted, 2 new edges.
#[derive(Debug, Clone)]
pub struct FunnelCase {
    pub world: World,
    pub dao: DaoContracts,
    pub eoa_only: usize,
}

pub fn delegation_funnel() -> FunnelCase {
    let mut w = World::new();
    let dao = w.governed_dao("uni", GovernorStyle::Bravo);
    w.seed_dao(&dao, "Uniswap", None);

    for i in 1..=7 {
        let c = w.contract(&format!("self delegating contract {i}"));
        w.delegate(&dao, c, c);
    }
    let a1 = w.tagged_contract("alpha treasury", "Alpha DAO: Treasury");
    let a2 = w.tagged_contract("alpha ops", "Alpha DAO: Operations");
    let b1 = w.tagged_contract("beta multisig", "Beta DAO: Multisig");
    let g1 = w.tagged_contract("gamma treasury", "Gamma DAO: Treasury");
    let d1 = w.tagged_contract("delta treasury", "Delta DAO: Treasury");
    let e1 = w.tagged_contract("epsilon treasury", "Epsilon DAO: Treasury");
    let gt1 = w.tagged_contract("gauntlet delegate", "Gauntlet: Delegate");
    let gt2 = w.tagged_contract("gauntlet voter", "Gauntlet: Voter");
    let l1 = w.tagged_contract("liquity bounties", "Liquity: Bounties");
    let u1 = w.tagged_contract("uni treasury", "Uni: Treasury");
    let x1 = w.contract("unlabelled vault");
    let y1 = named("unlabelled delegate");

    for (from, to) in [
        (a1, gt1),
        (a2, gt1),
        (a1, gt2), // alpha -> gauntlet
        (b1, gt1), // beta -> gauntlet
        (g1, l1),
        (g1, l1), // gamma -> liquity
        (d1, e1), // delta -> epsilon, never votes
        (x1, y1), // unlabelled pair, never votes
        (a1, a2),
        (a1, a2),
        (a2, a1),
        (a2, a1), // within alpha
        (b1, u1), // into the token's own DAO
    ] {
        w.delegate(&dao, from, to);
    }
    let eoa_only = 4;
    for i in 0..eoa_only {
        w.delegate(&dao, named(&format!("uni holder {i}")), named("uni popular delegate"));
    }
    w.propose(&dao, 1);
    w.vote(&dao, gt1, 1, 1, tokens(40_000));
    w.vote(&dao, l1, 1, 1, tokens(10_000));
    w.vote(&dao, named("uni popular delegate"), 1, 0, tokens(70_000));
    FunnelCase { world: w, dao, eoa_only }
}

/// Spaces around the follower threshold.
#[derive(Debug, Clone)]
pub struct SnapshotBoundaryCase {
    pub snapshot: SnapshotFixture,
    /// Referenced by a 50-follower and a 49-follower space.
    pub at_threshold: Address,
    /// Referenced only by a 49-follower space.
    pub below_threshold: Address,
    /// Referenced by several qualifying spaces of different sizes.
    pub contested: Address,
}

pub fn snapshot_boundary() -> SnapshotBoundaryCase {
    let mut fx = SnapshotFixture::default();
    let at = named("threshold token");
    let below = named("small token");
    let contested = named("contested token");
    fx.add_space("fifty.eth", 50, &[at]);
    fx.add_space("forty-nine.eth", 49, &[at]);
    fx.add_space("tiny.eth", 49, &[below]);
    fx.add_space("fans.eth", 60, &[contested]);
    fx.add_space("official.eth", 10_000, &[contested]);
    fx.add_space("impostor.eth", 9_999, &[contested]);
    SnapshotBoundaryCase { snapshot: fx, at_threshold: at, below_threshold: below, contested }
}

/// `root` is seeded; the treasury of each next DAO votes in the previous
/// one: root <- a <- b <- c <- d <- e. Every DAO but root is listed in
/// the directory.
pub fn expansion_chain() -> World {
    let mut w = World::new();
    let ids = ["root", "a", "b", "c", "d", "e"];
    let daos: Vec<DaoContracts> = ids.iter().map(|id| w.governed_dao(id, GovernorStyle::Bravo)).collect();
    w.seed_dao(&daos[0], "Root DAO", None);
    for (i, dao) in daos.iter().enumerate() {
        w.propose(dao, 1);
        w.vote(dao, named(&format!("{} voter", dao.id)), 1, 1, tokens(1_000));
        if i > 0 {
            let name = format!("DAO {}", dao.id.to_uppercase());
            w.list_dao(dao, &name, None);
            let treasury = w.tagged_contract(&format!("{} treasury", dao.id), &format!("{}: Treasury", dao.id));
            w.vote(&daos[i - 1], treasury, 1, 1, tokens(500));
        }
    }
    w
}

/// Two DAOs whose treasuries vote in each other, one of which also votes
/// in its own governor.
pub fn expansion_cycle() -> World {
    let mut w = World::new();
    let x = w.governed_dao("x", GovernorStyle::Bravo);
    let y = w.governed_dao("y", GovernorStyle::Bravo);
    w.seed_dao(&x, "X DAO", None);
    w.list_dao(&x, "X DAO", None);
    w.list_dao(&y, "Y DAO", None);
    let xt = w.tagged_contract("x treasury", "x: Treasury");
    let yt = w.tagged_contract("y treasury", "y: Treasury");
    for dao in [&x, &y] {
        w.propose(dao, 1);
        w.vote(dao, named(&format!("{} voter", dao.id)), 1, 1, tokens(100));
    }
    w.vote(&x, yt, 1, 1, tokens(10));
    w.vote(&y, xt, 1, 1, tokens(10));
    w.vote(&x, xt, 1, 1, tokens(10));
    w
}

/// Twelve DAO treasuries voting in the Convex Snapshot space.
pub fn convex_star() -> World {
    let mut w = World::new();
    let cvx = w.token_only_dao("convex", GovernorStyle::Bravo);
    w.space("cvx.eth", 4_200, &[cvx.token]);
    w.seed_dao(&cvx, "Convex Finance", Some("cvx.eth"));
    w.offchain_proposal("cvx.eth", "gauge-weight-1", "Gauge weight for week 1", "Vote on gauge weights.");
    for i in 1..=12 {
        let treasury = w.tagged_contract(&format!("star dao {i} treasury"), &format!("Star DAO {i:02}: Treasury"));
        w.offchain_vote("cvx.eth", "gauge-weight-1", treasury, 1 + i % 3, 1_000.0 * i as f64);
    }
    w.offchain_vote("cvx.eth", "gauge-weight-1", named("cvx holder"), 1, 5.0);
    w
}

/// `total` contract voters of which the first `labelled` carry name tags.
pub fn label_population(total: usize, labelled: usize) -> (Vec<Address>, FixtureTags) {
    let mut tags = FixtureTags::new();
    let voters: Vec<Address> = (0..total).map(|i| named(&format!("population voter {i}"))).collect();
    for (i, a) in voters.iter().take(labelled).enumerate() {
        tags.insert(*a, &format!("Population DAO {i:03}: Treasury"));
    }
    (voters, tags)
}

/// Several DAOs with on-chain and Snapshot governance, cross-DAO votes,
/// a delegation into a voting treasury, and Index Coop proposals that
/// discuss other DAOs more often than Index Coop votes in them.
pub fn metaverse() -> World {
    let mut w = World::new();
    let aave = w.governed_dao("aave", GovernorStyle::AaveV2);
    let compound = w.governed_dao("compound", GovernorStyle::Bravo);
    let uniswap = w.governed_dao("uniswap", GovernorStyle::Bravo);
    let index = w.token_only_dao("index", GovernorStyle::Bravo);
    let liquity = w.token_only_dao("liquity", GovernorStyle::Bravo);

    w.space("aave.eth", 10_000, &[aave.token]);
    w.space("aavefans.eth", 49, &[aave.token]);
    w.space("uniswap", 3_000, &[uniswap.token]);
    w.space("index-coop.eth", 800, &[index.token]);

    w.seed_dao(&aave, "Aave", None);
    w.seed_dao(&compound, "Compound", None);
    w.seed_dao(&uniswap, "Uniswap", None);
    w.seed_dao(&index, "Index Coop", Some("index-coop.eth"));
    w.list_dao(&liquity, "Liquity", None);

    let bounties = w.tagged_contract("liquity bounties", "Liquity: Bounties");
    let berkeley = w.tagged_contract("berkeley multisig", "Blockchain at Berkeley: Multisig");
    let index_treasury = w.tagged_contract("index treasury", "Index Coop: Treasury");
    w.overrides.insert(index_treasury, Some("Index Coop: Treasury"), Some("index"));

    w.propose(&aave, 95);
    w.vote(&aave, bounties, 95, 1, tokens(100_000));
    for (label, weight) in [("aave whale 1", 250_000), ("aave whale 2", 200_000), ("aave voter 3", 38_235)] {
        w.vote(&aave, named(label), 95, 1, tokens(weight));
    }
    w.execute(&aave, 95);
    w.propose(&aave, 96);
    w.vote(&aave, index_treasury, 96, 1, tokens(5_000));
    w.vote(&aave, named("aave whale 1"), 96, 0, tokens(250_000));

    w.propose(&compound, 100);
    for (label, support, weight) in [
        ("compound whale 1", 1, 300_000),
        ("compound whale 2", 1, 150_000),
        ("compound voter 3", 1, 42_678),
        ("compound whale 4", 0, 400_000),
        ("compound voter 5", 0, 49_842),
    ] {
        w.vote(&compound, named(label), 100, support, tokens(weight));
    }
    w.vote(&compound, berkeley, 100, 0, tokens(50_007));
    w.propose(&compound, 101);
    w.vote(&compound, index_treasury, 101, 1, tokens(2_000));
    w.vote(&compound, named("compound whale 1"), 101, 1, tokens(300_000));

    w.propose(&uniswap, 7);
    w.vote(&uniswap, index_treasury, 7, 1, tokens(1_000));
    w.vote(&uniswap, named("uniswap whale"), 7, 1, tokens(40_000_000));

    w.delegate(&aave, named("aave whale 2"), bounties);
    w.delegate(&aave, named("aave voter 3"), named("aave whale 1"));
    w.delegate(&compound, index_treasury, index_treasury);

    w.offchain_proposal("aave.eth", "arfc-1", "ARFC: onboard LUSD", "Temperature check.");
    w.offchain_vote("aave.eth", "arfc-1", index_treasury, 2, 5_000.0);
    w.offchain_vote("aave.eth", "arfc-1", named("aave whale 1"), 1, 250_000.0);
    w.offchain_vote("aave.eth", "arfc-1", index_treasury, 1, 5_000.0);
    w.offchain_proposal("uniswap", "temp-1", "Temperature check: fee switch", "Discuss.");
    w.offchain_vote("uniswap", "temp-1", index_treasury, 1, 1_000.0);
    w.offchain_vote("aavefans.eth", "fan-1", named("aave fan"), 1, 1.0);

    for (id, title, body) in [
        ("iip-1", "Add Aave v3 as a lending venue", "Deposit idle collateral into Aave."),
        ("iip-2", "Vote on Aave proposal 96", "Index Coop will vote FOR."),
        ("iip-3", "Treasury rebalancing", "Move 10% of stables to AAVE markets."),
        ("iip-4", "Lending yield comparison", "Compound and Aave yields over Q3."),
        ("iip-5", "Delegation policy", "Delegate our aave voting power to a steward."),
        ("iip-6", "Compound governance participation", "Should we vote in Compound?"),
        ("iip-7", "Aavegotchi integration", "Wearables for index holders."),
        ("iip-8", "Uniswap v3 liquidity", "Provide DPI liquidity on Uniswap."),
        ("iip-9", "Methodologist fees", "No other protocols named here."),
    ] {
        w.offchain_proposal("index-coop.eth", id, title, body);
    }
    w.offchain_vote("index-coop.eth", "iip-1", named("index holder"), 1, 300.0);
    w.offchain_vote("index-coop.eth", "iip-2", named("index holder"), 1, 300.0);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainio::ChainSource;

    #[test]
    fn named_addresses_are_stable_and_distinct() {
        assert_eq!(named("a"), named("a"));
        assert_ne!(named("a"), named("b"));
    }

    #[test]
    fn voting_case_counts_logs() {
        let case = voting_governor();
        let logs = case.chain.logs(case.governor, case.range, None).unwrap();
        let votes = logs.iter().filter(|l| l.topic0() == Some(case.vote_topic)).count();
        assert_eq!(votes, 120);
        assert_eq!(logs.iter().filter(|l| l.topics.is_empty()).count() as u64, case.anonymous_logs);
        assert_eq!(logs.len(), 120 + 9 + 9 + 3);
    }

    #[test]
    fn metaverse_writes_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let w = metaverse();
        w.write_dir(dir.path()).unwrap();
        let chain = FixtureChain::load(&dir.path().join(pipeline::CHAIN_DIR)).unwrap();
        assert_eq!(chain.all_logs().len(), w.chain.all_logs().len());
        assert_eq!(chain.full_range(), w.range());
    }
}
