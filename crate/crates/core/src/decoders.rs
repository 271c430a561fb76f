//! Decoders over the 8-bit syndrome: the empirical lookup table and the
//! Tomita–Svore unit-weight matching rules, plus fidelity evaluation.

use std::fmt::Write as _;

use crate::code_model::{CodeLayout, NUM_DATA};
use crate::error::{invalid, Error, Result};
use crate::frame::JointCounts;
use crate::pauli::Basis;
use crate::textfmt::{field, split_header};

/// Per-syndrome decision of a lookup table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Keep,
    Flip,
    /// Equal counts (including unseen syndromes). Resolved to keep.
    Tie,
}

impl Decision {
    pub fn flips(self) -> bool {
        self == Decision::Flip
    }

    fn name(self) -> &'static str {
        match self {
            Decision::Keep => "keep",
            Decision::Flip => "flip",
            Decision::Tie => "tie",
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" => Ok(Decision::Keep),
            "flip" => Ok(Decision::Flip),
            "tie" => Ok(Decision::Tie),
            other => Err(format!("unknown decision `{other}`")),
        }
    }
}

/// Majority decision per syndrome, with the counts it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable {
    pub decisions: [Decision; 256],
    pub source: JointCounts,
}

impl LookupTable {
    pub fn basis(&self) -> Basis {
        self.source.basis
    }

    pub fn decide(&self, syndrome: u8) -> bool {
        self.decisions[syndrome as usize].flips()
    }

    /// Success probability of this fixed table on (possibly different) counts.
    pub fn fidelity_on(&self, counts: &JointCounts) -> Result<f64> {
        fixed_rule_fidelity(counts, |s| self.decide(s))
    }

    pub fn to_text(&self) -> String {
        let mut header = self.source.header();
        header.title = "surface17 lookup table".into();
        header.push("bit_order", "0-3 ancilla round, 4-7 readout round");
        let mut out = header.render();
        out.push_str("syndrome,count_noflip,count_flip,decision\n");
        for s in 0..=255u8 {
            let [keep, flip] = self.source.get(s);
            let _ = writeln!(
                out,
                "{s},{keep},{flip},{}",
                self.decisions[s as usize].name()
            );
        }
        out
    }

    /// Parse a table written by [`to_text`](Self::to_text). Decisions are
    /// checked against the stored counts.
    pub fn from_text(text: &str) -> Result<Self> {
        let (header, body) = split_header(text)?;
        let mut counts = JointCounts::new(
            header.parse("basis")?,
            header.params()?,
            header.parse("seed")?,
        );
        let standard = [
            "basis",
            "p",
            "m",
            "g",
            "t1_over_t2",
            "t_over_t2",
            "seed",
            "samples",
            "bit_order",
        ];
        for (k, v) in &header.entries {
            if !standard.contains(&k.as_str()) {
                counts.meta.push(k.clone(), v);
            }
        }
        let mut stated = Vec::with_capacity(256);
        for (line, row) in body
            .into_iter()
            .skip_while(|(_, l)| l.starts_with("syndrome"))
        {
            let mut cols = row.split(',');
            let s: u8 = field(line, cols.next(), "syndrome")?;
            let keep: u64 = field(line, cols.next(), "count_noflip")?;
            let flip: u64 = field(line, cols.next(), "count_flip")?;
            let decision: Decision = cols
                .next()
                .ok_or_else(|| Error::Parse {
                    line,
                    reason: "missing column `decision`".into(),
                })?
                .trim()
                .parse()
                .map_err(|reason| Error::Parse { line, reason })?;
            counts.add_count(s, false, keep);
            counts.add_count(s, true, flip);
            stated.push((line, s, decision));
        }
        let table = build_lut(&counts);
        for (line, s, decision) in stated {
            if table.decisions[s as usize] != decision {
                return Err(Error::Parse {
                    line,
                    reason: format!("decision for syndrome {s} contradicts its counts"),
                });
            }
        }
        Ok(table)
    }
}

/// Majority vote per syndrome; equal counts are ties.
pub fn build_lut(counts: &JointCounts) -> LookupTable {
    let mut decisions = [Decision::Tie; 256];
    for (d, &[keep, flip]) in decisions.iter_mut().zip(counts.rows()) {
        *d = match keep.cmp(&flip) {
            std::cmp::Ordering::Greater => Decision::Keep,
            std::cmp::Ordering::Less => Decision::Flip,
            std::cmp::Ordering::Equal => Decision::Tie,
        };
    }
    LookupTable {
        decisions,
        source: counts.clone(),
    }
}

fn require_samples(counts: &JointCounts) -> Result<f64> {
    match counts.total() {
        0 => Err(invalid("counts", "no samples")),
        n => Ok(n as f64),
    }
}

/// Optimal decoding fidelity: `sum_s max(keep, flip) / total`.
pub fn lut_fidelity(counts: &JointCounts) -> Result<f64> {
    let total = require_samples(counts)?;
    let hits: u64 = counts.rows().iter().map(|&[k, f]| k.max(f)).sum();
    Ok(hits as f64 / total)
}

/// Fidelity of an arbitrary per-syndrome rule.
pub fn fixed_rule_fidelity(counts: &JointCounts, flip: impl Fn(u8) -> bool) -> Result<f64> {
    let total = require_samples(counts)?;
    let hits: u64 = (0..=255u8).map(|s| counts.get(s)[flip(s) as usize]).sum();
    Ok(hits as f64 / total)
}

/// Train a table on one sample and score it on an independent one.
pub fn held_out_fidelity(train: &JointCounts, test: &JointCounts) -> Result<f64> {
    build_lut(train).fidelity_on(test)
}

/// Drop the ancilla-round bits, keeping only what the final readout shows.
pub fn marginalize_to_final_round(counts: &JointCounts) -> JointCounts {
    let mut out = JointCounts::new(counts.basis, counts.params, counts.seed);
    out.meta = counts.meta.clone();
    for s in 0..=255u8 {
        let [keep, flip] = counts.get(s);
        out.add_count(s & 0xf0, false, keep);
        out.add_count(s & 0xf0, true, flip);
    }
    out
}

/// Node of the defect graph: relevant stabilizer `k` (0..4) in `round`
/// 0 (ancilla) or 1 (readout).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefectNode {
    pub stabilizer: usize,
    pub round: usize,
}

impl DefectNode {
    fn index(self) -> usize {
        self.round * 4 + self.stabilizer
    }
}

const BOUNDARY: usize = 8;
const NODES: usize = 9;

/// Unit-weight edges between syndrome changes, each labelled with whether
/// the corresponding single error crosses the measured logical operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectGraph {
    /// `edges[i][j]` is the logical parity of an edge, if present; node 8 is
    /// the boundary.
    edges: [[Option<bool>; NODES]; NODES],
    /// Shortest-path length and logical parity between any two nodes.
    dist: [[Option<(u32, bool)>; NODES]; NODES],
}

impl DefectGraph {
    /// Build the graph for `basis` readouts. Space-like, diagonal and
    /// boundary edges come from a single data error at each point of the
    /// schedule; time-like edges from a flipped ancilla outcome.
    pub fn new(layout: &CodeLayout, basis: Basis) -> Self {
        let relevant = layout.relevant_stabilizers(basis);
        let logical = layout.measured_logical(basis);
        let mut edges = [[None; NODES]; NODES];
        let mut add = |a: usize, b: usize, parity: bool| {
            if edges[a][b].is_none() {
                edges[a][b] = Some(parity);
                edges[b][a] = Some(parity);
            }
        };

        for q in 0..NUM_DATA {
            let qubit = crate::code_model::QubitId::data(q + 1);
            let parity = logical.support.iter().any(|&(l, _)| l == qubit);
            let touching: Vec<(usize, Option<usize>)> = relevant
                .iter()
                .enumerate()
                .filter(|(_, &id)| layout.stabilizer(id).contains(qubit))
                .map(|(k, &id)| {
                    let round = layout
                        .is_gated(id, basis)
                        .then(|| layout.full_schedule().round_of(id, qubit))
                        .flatten();
                    (k, round)
                })
                .collect();
            if touching.is_empty() {
                continue;
            }
            // The error arrives before gate round `slot` (slot 4: after all).
            for slot in 0..=4 {
                let defects: Vec<usize> = touching
                    .iter()
                    .map(|&(k, round)| {
                        let seen_by_ancilla = round.is_some_and(|r| r >= slot);
                        DefectNode {
                            stabilizer: k,
                            round: if seen_by_ancilla { 0 } else { 1 },
                        }
                        .index()
                    })
                    .collect();
                match defects.as_slice() {
                    [a] => add(*a, BOUNDARY, parity),
                    [a, b] => add(*a, *b, parity),
                    _ => unreachable!("a data qubit lies in at most two relevant plaquettes"),
                }
            }
        }
        for (k, &id) in relevant.iter().enumerate() {
            if layout.is_gated(id, basis) {
                add(k, k + 4, false);
            }
        }

        let mut dist = [[None; NODES]; NODES];
        for (src, row) in dist.iter_mut().enumerate() {
            row[src] = Some((0, false));
            let mut frontier = vec![src];
            let mut d = 0;
            while !frontier.is_empty() {
                d += 1;
                let mut next = Vec::new();
                for &u in &frontier {
                    let (_, pu) = row[u].unwrap();
                    for v in 0..NODES {
                        if let (Some(pe), None) = (edges[u][v], row[v]) {
                            row[v] = Some((d, pu ^ pe));
                            next.push(v);
                        }
                    }
                }
                frontier = next;
            }
        }
        DefectGraph { edges, dist }
    }

    /// Logical parity of the edge between two nodes, if adjacent.
    pub fn edge(&self, a: DefectNode, b: DefectNode) -> Option<bool> {
        self.edges[a.index()][b.index()]
    }

    pub fn boundary_edge(&self, a: DefectNode) -> Option<bool> {
        self.edges[a.index()][BOUNDARY]
    }

    pub fn edge_count(&self) -> usize {
        let mut n = 0;
        for i in 0..NODES {
            for j in i + 1..NODES {
                n += self.edges[i][j].is_some() as usize;
            }
        }
        n
    }

    /// Defects of an 8-bit syndrome: round-0 changes against the all-+1
    /// reference, round-1 changes against round 0.
    pub fn defects(syndrome: u8) -> Vec<DefectNode> {
        let first = syndrome & 0x0f;
        let second = (syndrome >> 4) ^ first;
        let mut out = Vec::new();
        for k in 0..4 {
            if first >> k & 1 == 1 {
                out.push(DefectNode {
                    stabilizer: k,
                    round: 0,
                });
            }
        }
        for k in 0..4 {
            if second >> k & 1 == 1 {
                out.push(DefectNode {
                    stabilizer: k,
                    round: 1,
                });
            }
        }
        out.sort();
        out
    }

    /// Minimum-weight matching of the defects, each matched to another
    /// defect or the boundary. Equal-weight alternatives keep the first
    /// found: partners are tried in ascending (stabilizer, round) order and
    /// the boundary last. Returns the logical parity of the correction.
    pub fn match_defects(&self, defects: &[DefectNode]) -> bool {
        let nodes: Vec<usize> = defects.iter().map(|d| d.index()).collect();
        let mut used = vec![false; nodes.len()];
        self.best(&nodes, &mut used)
            .map(|(_, parity)| parity)
            .unwrap_or(false)
    }

    fn best(&self, nodes: &[usize], used: &mut [bool]) -> Option<(u32, bool)> {
        let Some(i) = used.iter().position(|&u| !u) else {
            return Some((0, false));
        };
        used[i] = true;
        let mut best: Option<(u32, bool)> = None;
        let mut consider = |cand: Option<(u32, bool)>| {
            if let Some(c) = cand {
                if best.is_none_or(|b| c.0 < b.0) {
                    best = Some(c);
                }
            }
        };
        for j in i + 1..nodes.len() {
            if used[j] {
                continue;
            }
            if let Some((d, p)) = self.dist[nodes[i]][nodes[j]] {
                used[j] = true;
                let rest = self.best(nodes, used);
                used[j] = false;
                consider(rest.map(|(w, q)| (w + d, q ^ p)));
            }
        }
        if let Some((d, p)) = self.dist[nodes[i]][BOUNDARY] {
            let rest = self.best(nodes, used);
            consider(rest.map(|(w, q)| (w + d, q ^ p)));
        }
        used[i] = false;
        best
    }
}

/// Tomita–Svore decoder with every decision precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct TomitaSvoreDecoder {
    pub basis: Basis,
    pub graph: DefectGraph,
    flips: [bool; 256],
}

impl TomitaSvoreDecoder {
    pub fn new(layout: &CodeLayout, basis: Basis) -> Self {
        let graph = DefectGraph::new(layout, basis);
        let mut flips = [false; 256];
        for (s, f) in flips.iter_mut().enumerate() {
            *f = graph.match_defects(&DefectGraph::defects(s as u8));
        }
        TomitaSvoreDecoder {
            basis,
            graph,
            flips,
        }
    }

    pub fn decide(&self, syndrome: u8) -> bool {
        self.flips[syndrome as usize]
    }

    pub fn fidelity(&self, counts: &JointCounts) -> Result<f64> {
        if counts.basis != self.basis {
            return Err(invalid(
                "counts",
                format!(
                    "decoder built for basis {} but counts are for {}",
                    self.basis, counts.basis
                ),
            ));
        }
        fixed_rule_fidelity(counts, |s| self.decide(s))
    }
}

/// `true` if the decoder flips the readout for `syndrome`.
pub fn ts_decode(syndrome: u8, layout: &CodeLayout, basis: Basis) -> bool {
    let graph = DefectGraph::new(layout, basis);
    graph.match_defects(&DefectGraph::defects(syndrome))
}

pub fn ts_fidelity(counts: &JointCounts, layout: &CodeLayout) -> Result<f64> {
    TomitaSvoreDecoder::new(layout, counts.basis).fidelity(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::{build_surface17, StabilizerSet, Variant};
    use crate::noise::NoiseParams;

    fn empty(basis: Basis) -> JointCounts {
        JointCounts::new(basis, NoiseParams::noiseless(), 0)
    }

    #[test]
    fn lut_examples() {
        let mut c = empty(Basis::Z);
        c.add_count(0, false, 10);
        let t = build_lut(&c);
        assert_eq!(t.decisions[0], Decision::Keep);
        assert!(t.decisions[1..].iter().all(|&d| d == Decision::Tie));

        c.add_count(5, false, 30);
        c.add_count(5, true, 70);
        c.add_count(9, false, 50);
        c.add_count(9, true, 50);
        let t = build_lut(&c);
        assert_eq!(t.decisions[5], Decision::Flip);
        assert_eq!(t.decisions[9], Decision::Tie);
        assert!(!t.decide(9));
    }

    #[test]
    fn lut_fidelity_examples() {
        let mut c = empty(Basis::Z);
        c.add_count(0, false, 90);
        c.add_count(0, true, 10);
        c.add_count(1, false, 20);
        c.add_count(1, true, 30);
        assert!((lut_fidelity(&c).unwrap() - 0.8).abs() < 1e-15);

        let mut u = empty(Basis::X);
        for s in 0..=255u8 {
            u.add_count(s, false, 3);
            u.add_count(s, true, 3);
        }
        assert_eq!(lut_fidelity(&u).unwrap(), 0.5);
        assert!(lut_fidelity(&empty(Basis::Z)).is_err());
    }

    #[test]
    fn marginal_keeps_readout_bits() {
        let mut c = empty(Basis::Z);
        c.add_count(0xf3, true, 4);
        c.add_count(0x05, false, 2);
        let m = marginalize_to_final_round(&c);
        assert_eq!(m.get(0xf0), [0, 4]);
        assert_eq!(m.get(0x00), [2, 0]);
        assert_eq!(m.total(), 6);
    }

    #[test]
    fn defects_of_syndromes() {
        assert!(DefectGraph::defects(0).is_empty());
        // Flagged by the ancilla but not by the readout: appears, then
        // disappears.
        assert_eq!(
            DefectGraph::defects(0x01),
            vec![
                DefectNode {
                    stabilizer: 0,
                    round: 0
                },
                DefectNode {
                    stabilizer: 0,
                    round: 1
                }
            ]
        );
        assert_eq!(
            DefectGraph::defects(0x20),
            vec![DefectNode {
                stabilizer: 1,
                round: 1
            }]
        );
    }

    #[test]
    fn graph_shape_fig1a_z() {
        let layout = build_surface17(Variant::Fig1a, StabilizerSet::All8);
        let g = DefectGraph::new(&layout, Basis::Z);
        let n = |k, r| DefectNode {
            stabilizer: k,
            round: r,
        };
        // Neighbouring white plaquettes share q2, q5 and q8.
        for (a, b) in [(0, 1), (1, 2), (2, 3)] {
            assert!(g.edge(n(a, 0), n(b, 0)).is_some());
            assert!(g.edge(n(a, 1), n(b, 1)).is_some());
        }
        assert!(g.edge(n(0, 0), n(2, 0)).is_none());
        // Left column boundary crosses logical Z.
        assert_eq!(g.boundary_edge(n(1, 1)), Some(true));
        assert_eq!(g.boundary_edge(n(3, 0)), Some(true));
        assert_eq!(g.boundary_edge(n(2, 1)), Some(false));
        for k in 0..4 {
            assert_eq!(g.edge(n(k, 0), n(k, 1)), Some(false));
        }
    }

    #[test]
    fn ts_examples() {
        let layout = build_surface17(Variant::Fig1a, StabilizerSet::All8);
        assert!(!ts_decode(0x00, &layout, Basis::Z));
        assert!(!ts_decode(0x01, &layout, Basis::Z));
        assert!(!ts_decode(0x11, &layout, Basis::Z));
        // A lone defect on W1 is matched through the left boundary.
        assert!(ts_decode(0x22, &layout, Basis::Z));
        assert!(ts_decode(0x20, &layout, Basis::Z));
        // W0 and W1 share q2, which is off the logical string.
        assert!(!ts_decode(0x33, &layout, Basis::Z));
    }

    #[test]
    fn ts_corrects_every_single_fault() {
        use crate::frame::FrameSimulator;
        use crate::pauli::Pauli;
        for variant in [Variant::Fig1a, Variant::Fig1b] {
            for set in [
                StabilizerSet::All8,
                StabilizerSet::Relevant4,
                StabilizerSet::Bulk4,
            ] {
                let layout = build_surface17(variant, set);
                for basis in Basis::BOTH {
                    let sim =
                        FrameSimulator::new(&layout, &NoiseParams::noiseless(), basis).unwrap();
                    let dec = TomitaSvoreDecoder::new(&layout, basis);
                    for (l, loc) in sim.circuit().locations().iter().enumerate() {
                        for p in Pauli::NON_IDENTITY {
                            let r = sim.fault_effect(l, p);
                            assert_eq!(
                                dec.decide(r.syndrome),
                                r.logical_flip,
                                "{variant:?} {set:?} {basis}: {p} at {loc:?} gives {:#04x}",
                                r.syndrome
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lut_file_round_trip() {
        let mut c = empty(Basis::X);
        c.add_count(0, false, 100);
        c.add_count(0x31, true, 7);
        c.add_count(0x31, false, 2);
        c.meta.push("variant", "fig1a");
        let t = build_lut(&c);
        let text = t.to_text();
        assert_eq!(LookupTable::from_text(&text).unwrap(), t);
        let bad = text.replace("\n49,2,7,flip\n", "\n49,2,7,keep\n");
        assert!(matches!(
            LookupTable::from_text(&bad),
            Err(Error::Parse { .. })
        ));
    }
}
