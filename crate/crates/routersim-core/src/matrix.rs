//! Crossbar switching matrix: which bidirectional switches exist, which port
//! pair each one bridges, and what the resulting port connectivity is for a
//! given set of gate states.
//!
//! The matrix is purely combinational. Closing a switch joins the two ports it
//! bridges into one electrical block; ports reachable through a chain of closed
//! switches belong to the same block. All operations here are value-semantic
//! and safe to call from any thread.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of router ports. Ports 1-3 carry the default scenario; port 4 is
/// present in the hardware but left unconnected.
pub const PORT_COUNT: usize = 4;

/// Default switch voltage rating in volts.
pub const DEFAULT_VOLTAGE_RATING_V: f64 = 650.0;

/// Default switch current rating in amperes.
pub const DEFAULT_CURRENT_RATING_A: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("port index {0} out of range 1..={PORT_COUNT}")]
    InvalidPort(u8),
    #[error("unknown switch {0} for this topology")]
    UnknownSwitch(SwitchId),
    #[error("unknown switch name `{0}`")]
    UnknownSwitchName(String),
    #[error("switch {0} bridges port {1} to itself")]
    SelfLoop(SwitchId, PortId),
    #[error("ports {0:?} form a multi-port connection; pairwise attribution is ambiguous")]
    MultiConnection(Vec<PortId>),
}

/// One of the four router ports, numbered 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PortId(u8);

impl PortId {
    pub fn new(index: u8) -> Result<Self, MatrixError> {
        if (1..=PORT_COUNT as u8).contains(&index) {
            Ok(Self(index))
        } else {
            Err(MatrixError::InvalidPort(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// All four ports in ascending order.
    pub fn all() -> impl Iterator<Item = PortId> {
        (1..=PORT_COUNT as u8).map(PortId)
    }
}

impl TryFrom<u8> for PortId {
    type Error = MatrixError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        PortId::new(v)
    }
}

impl From<PortId> for u8 {
    fn from(p: PortId) -> u8 {
        p.0
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of one bidirectional switch in the matrix.
///
/// The hardware names its switches SW<digit><channel>. Only `Sw1A` and `Sw2A`
/// have port assignments stated for the real device; the rest exist so that
/// extended topologies can be described in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SwitchId {
    Sw1A,
    Sw1B,
    Sw2A,
    Sw2B,
    Sw3A,
    Sw3B,
    Sw4A,
    Sw4B,
}

impl SwitchId {
    pub const ALL: [SwitchId; 8] = [
        SwitchId::Sw1A,
        SwitchId::Sw1B,
        SwitchId::Sw2A,
        SwitchId::Sw2B,
        SwitchId::Sw3A,
        SwitchId::Sw3B,
        SwitchId::Sw4A,
        SwitchId::Sw4B,
    ];

    /// Canonical upper-case name, e.g. `SW1A`.
    pub fn name(self) -> &'static str {
        match self {
            SwitchId::Sw1A => "SW1A",
            SwitchId::Sw1B => "SW1B",
            SwitchId::Sw2A => "SW2A",
            SwitchId::Sw2B => "SW2B",
            SwitchId::Sw3A => "SW3A",
            SwitchId::Sw3B => "SW3B",
            SwitchId::Sw4A => "SW4A",
            SwitchId::Sw4B => "SW4B",
        }
    }

    /// Lower-case name used for trace CSV column headers, e.g. `sw1a`.
    pub fn column_name(self) -> String {
        self.name().to_ascii_lowercase()
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SwitchId {
    type Err = MatrixError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        SwitchId::ALL
            .iter()
            .copied()
            .find(|sw| sw.name() == upper)
            .ok_or_else(|| MatrixError::UnknownSwitchName(s.to_string()))
    }
}

impl TryFrom<String> for SwitchId {
    type Error = MatrixError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SwitchId> for String {
    fn from(sw: SwitchId) -> String {
        sw.name().to_string()
    }
}

/// The set of switches installed in the matrix and the port pair each bridges,
/// along with the device ratings used for post-hoc trace checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTopology {
    bridges: BTreeMap<SwitchId, (PortId, PortId)>,
    voltage_rating_v: f64,
    current_rating_a: f64,
}

impl SwitchTopology {
    pub fn new(
        bridges: BTreeMap<SwitchId, (PortId, PortId)>,
        voltage_rating_v: f64,
        current_rating_a: f64,
    ) -> Result<Self, MatrixError> {
        for (&sw, &(a, b)) in &bridges {
            if a == b {
                return Err(MatrixError::SelfLoop(sw, a));
            }
        }
        Ok(Self {
            bridges,
            voltage_rating_v,
            current_rating_a,
        })
    }

    /// The two-switch subset installed between the three active ports:
    /// SW1A bridges ports 1-3 and SW2A bridges ports 2-3.
    pub fn two_switch() -> Self {
        let mut bridges = BTreeMap::new();
        bridges.insert(SwitchId::Sw1A, (port(1), port(3)));
        bridges.insert(SwitchId::Sw2A, (port(2), port(3)));
        Self {
            bridges,
            voltage_rating_v: DEFAULT_VOLTAGE_RATING_V,
            current_rating_a: DEFAULT_CURRENT_RATING_A,
        }
    }

    /// Full eight-switch matrix.
    ///
    /// Only the SW1A and SW2A assignments are known from the hardware; the
    /// remaining six are a configuration guess: SW1B/SW2B mirror the house
    /// ports onto port 4, and the tie switches SW3x/SW4x pair the house bus
    /// (1-2) and the storage bus (3-4) with a parallel channel each.
    pub fn extended_eight() -> Self {
        let mut bridges = BTreeMap::new();
        bridges.insert(SwitchId::Sw1A, (port(1), port(3)));
        bridges.insert(SwitchId::Sw2A, (port(2), port(3)));
        bridges.insert(SwitchId::Sw1B, (port(1), port(4)));
        bridges.insert(SwitchId::Sw2B, (port(2), port(4)));
        bridges.insert(SwitchId::Sw3A, (port(1), port(2)));
        bridges.insert(SwitchId::Sw4A, (port(1), port(2)));
        bridges.insert(SwitchId::Sw3B, (port(3), port(4)));
        bridges.insert(SwitchId::Sw4B, (port(3), port(4)));
        Self {
            bridges,
            voltage_rating_v: DEFAULT_VOLTAGE_RATING_V,
            current_rating_a: DEFAULT_CURRENT_RATING_A,
        }
    }

    pub fn bridge(&self, sw: SwitchId) -> Option<(PortId, PortId)> {
        self.bridges.get(&sw).copied()
    }

    pub fn contains(&self, sw: SwitchId) -> bool {
        self.bridges.contains_key(&sw)
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> + '_ {
        self.bridges.keys().copied()
    }

    pub fn bridges(&self) -> impl Iterator<Item = (SwitchId, (PortId, PortId))> + '_ {
        self.bridges.iter().map(|(&sw, &pair)| (sw, pair))
    }

    pub fn len(&self) -> usize {
        self.bridges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bridges.is_empty()
    }

    pub fn voltage_rating_v(&self) -> f64 {
        self.voltage_rating_v
    }

    pub fn current_rating_a(&self) -> f64 {
        self.current_rating_a
    }

    /// Gate states with every switch of this topology open.
    pub fn all_off(&self) -> GateStates {
        GateStates {
            state: self.bridges.keys().map(|&sw| (sw, false)).collect(),
        }
    }
}

/// On/off state of every switch in a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateStates {
    state: BTreeMap<SwitchId, bool>,
}

impl GateStates {
    pub fn from_map(state: BTreeMap<SwitchId, bool>) -> Self {
        Self { state }
    }

    pub fn get(&self, sw: SwitchId) -> Option<bool> {
        self.state.get(&sw).copied()
    }

    pub fn is_on(&self, sw: SwitchId) -> bool {
        self.state.get(&sw).copied().unwrap_or(false)
    }

    /// Returns a copy with `sw` set to `on`; all other switches unchanged.
    pub fn set_gate(&self, sw: SwitchId, on: bool) -> Result<GateStates, MatrixError> {
        if !self.state.contains_key(&sw) {
            return Err(MatrixError::UnknownSwitch(sw));
        }
        let mut next = self.clone();
        next.state.insert(sw, on);
        Ok(next)
    }

    /// True when this state assigns every switch of `topology` (and no other).
    pub fn covers(&self, topology: &SwitchTopology) -> bool {
        self.state.len() == topology.len() && topology.switches().all(|sw| self.state.contains_key(&sw))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SwitchId, bool)> + '_ {
        self.state.iter().map(|(&sw, &on)| (sw, on))
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> + '_ {
        self.state.keys().copied()
    }
}

/// Partition of the four ports into electrically connected blocks.
///
/// Blocks are sorted by their smallest member and each block's members are
/// sorted, so two partitions compare equal iff they describe the same
/// connectivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<PortId>>,
}

impl Partition {
    pub fn blocks(&self) -> &[Vec<PortId>] {
        &self.blocks
    }

    pub fn block_of(&self, p: PortId) -> &[PortId] {
        self.blocks
            .iter()
            .find(|b| b.contains(&p))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn same_block(&self, a: PortId, b: PortId) -> bool {
        self.block_of(a).contains(&b)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut x = x;
        while self.parent[x] != x {
            // path halving
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Partition the ports into connected blocks: two ports share a block iff a
/// path of closed switches joins them.
pub fn connectivity(topology: &SwitchTopology, gates: &GateStates) -> Partition {
    debug_assert!(gates.covers(topology), "gate states must cover the topology");
    let mut uf = UnionFind::new(PORT_COUNT);
    for (sw, (a, b)) in topology.bridges() {
        if gates.is_on(sw) {
            uf.union(a.index() as usize - 1, b.index() as usize - 1);
        }
    }
    let mut by_root: BTreeMap<usize, Vec<PortId>> = BTreeMap::new();
    for p in PortId::all() {
        let root = uf.find(p.index() as usize - 1);
        by_root.entry(root).or_default().push(p);
    }
    let mut blocks: Vec<Vec<PortId>> = by_root.into_values().collect();
    blocks.sort_by_key(|b| b[0]);
    Partition { blocks }
}

/// The unique port connected to `p`, if any.
///
/// Returns `None` when `p` is isolated and an error when `p` sits in a block
/// of more than two ports, since pairwise energy attribution is then
/// ill-defined.
pub fn connected_peer(
    topology: &SwitchTopology,
    gates: &GateStates,
    p: PortId,
) -> Result<Option<PortId>, MatrixError> {
    let partition = connectivity(topology, gates);
    let block = partition.block_of(p);
    match block.len() {
        1 => Ok(None),
        2 => Ok(Some(*block.iter().find(|&&q| q != p).unwrap())),
        _ => Err(MatrixError::MultiConnection(block.to_vec())),
    }
}

fn port(i: u8) -> PortId {
    PortId::new(i).unwrap()
}
