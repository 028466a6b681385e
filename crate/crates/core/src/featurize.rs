//! Ring/hybridization perception and the attributed molecular graph.
//!
//! Node layout (22): atom type C,O,N,F,S,Cl,P,B,Br | in ring | aromatic |
//! charge -1,0,+1 | sp,sp2,sp3,sp3d2 | H count 0..3.
//! Edge layout (6): single,double,triple,aromatic | conjugated | in ring.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::FeatureError;
use crate::smiles::{BondOrder, Element, MolecularStructure};
use crate::tensor::Matrix;

pub const NODE_FEATURES: usize = 22;
pub const EDGE_FEATURES: usize = 6;

/// Bound into every model artifact; bump when any slot meaning changes.
pub const FEATURIZER_VERSION: &str = "ilgamma-featurizer/1";

const RING_SLOT: usize = 9;
const AROMATIC_SLOT: usize = 10;
const CHARGE_BASE: usize = 11;
const HYBRID_BASE: usize = 14;
const HCOUNT_BASE: usize = 18;

const CONJUGATED_SLOT: usize = 4;
const BOND_RING_SLOT: usize = 5;

pub const NODE_FEATURE_NAMES: [&str; NODE_FEATURES] = [
    "type_C", "type_O", "type_N", "type_F", "type_S", "type_Cl", "type_P", "type_B", "type_Br",
    "in_ring", "aromatic", "charge_-1", "charge_0", "charge_+1", "sp", "sp2", "sp3", "sp3d2",
    "h_0", "h_1", "h_2", "h_3",
];

pub const EDGE_FEATURE_NAMES: [&str; EDGE_FEATURES] =
    ["single", "double", "triple", "aromatic", "conjugated", "bond_in_ring"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d2,
}

impl Hybridization {
    pub fn slot(self) -> usize {
        match self {
            Hybridization::Sp => 0,
            Hybridization::Sp2 => 1,
            Hybridization::Sp3 => 2,
            Hybridization::Sp3d2 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingFlags {
    pub atom_in_ring: Vec<bool>,
    pub bond_in_ring: Vec<bool>,
}

/// An atom or bond is in a ring iff it lies on a cycle, i.e. the bond is not
/// a bridge, and the atom touches at least one non-bridge bond.
pub fn perceive_rings(structure: &MolecularStructure) -> RingFlags {
    let n = structure.atoms.len();
    let incidence = structure.incidence();
    let mut bridge = vec![false; structure.bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;

    // iterative DFS: (atom, bond used to enter, next incidence position)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(v, parent_bond, pos)) = stack.last() {
            if pos < incidence[v].len() {
                let b = incidence[v][pos];
                stack.last_mut().expect("non-empty").2 += 1;
                if Some(b) == parent_bond {
                    continue;
                }
                let w = structure.bonds[b].other(v);
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, Some(b), 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let (Some(b), Some(&(u, _, _))) = (parent_bond, stack.last()) {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        bridge[b] = true;
                    }
                }
            }
        }
    }

    let bond_in_ring: Vec<bool> = bridge.iter().map(|b| !b).collect();
    let atom_in_ring = (0..n)
        .map(|a| incidence[a].iter().any(|&b| bond_in_ring[b]))
        .collect();
    RingFlags {
        atom_in_ring,
        bond_in_ring,
    }
}

/// Rule table: sp3d2 for ≥5 heavy neighbours; sp for a triple bond or two
/// double bonds; sp2 for aromatic atoms or one double bond; sp3 otherwise.
pub fn perceive_hybridization(structure: &MolecularStructure, atom: usize) -> Hybridization {
    let mut degree = 0;
    let mut doubles = 0;
    let mut triples = 0;
    for b in structure.bonds.iter().filter(|b| b.touches(atom)) {
        degree += 1;
        match b.order {
            BondOrder::Double => doubles += 1,
            BondOrder::Triple => triples += 1,
            _ => {}
        }
    }
    if degree >= 5 {
        Hybridization::Sp3d2
    } else if triples > 0 || doubles >= 2 {
        Hybridization::Sp
    } else if structure.atoms[atom].aromatic || doubles == 1 {
        Hybridization::Sp2
    } else {
        Hybridization::Sp3
    }
}

/// Per-atom facts the node vector is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomFlags {
    pub element: Element,
    pub in_ring: bool,
    pub aromatic: bool,
    pub charge: i8,
    pub hybridization: Hybridization,
    pub hydrogens: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BondFlags {
    pub order: BondOrder,
    pub conjugated: bool,
    pub in_ring: bool,
}

pub fn node_features(atom_index: usize, flags: &AtomFlags) -> Result<[f64; NODE_FEATURES], FeatureError> {
    let mut v = [0.0; NODE_FEATURES];
    v[flags.element.slot()] = 1.0;
    if flags.in_ring {
        v[RING_SLOT] = 1.0;
    }
    if flags.aromatic {
        v[AROMATIC_SLOT] = 1.0;
    }
    let charge_slot = match flags.charge {
        -1 => 0,
        0 => 1,
        1 => 2,
        c => {
            return Err(FeatureError::UnsupportedCharge {
                atom: atom_index,
                charge: c,
            })
        }
    };
    v[CHARGE_BASE + charge_slot] = 1.0;
    v[HYBRID_BASE + flags.hybridization.slot()] = 1.0;
    if flags.hydrogens > 3 {
        return Err(FeatureError::TooManyHydrogens {
            atom: atom_index,
            element: flags.element.to_string(),
            count: flags.hydrogens,
        });
    }
    v[HCOUNT_BASE + flags.hydrogens as usize] = 1.0;
    Ok(v)
}

pub fn edge_features(flags: &BondFlags) -> [f64; EDGE_FEATURES] {
    let mut v = [0.0; EDGE_FEATURES];
    v[flags.order.slot()] = 1.0;
    if flags.conjugated {
        v[CONJUGATED_SLOT] = 1.0;
    }
    if flags.in_ring {
        v[BOND_RING_SLOT] = 1.0;
    }
    v
}

/// Heavy-atom graph with fixed-width node and edge features. Every bond
/// appears as two directed edges, `2k` (begin → end) and `2k + 1` (end → begin).
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    pub node_features: Matrix,
    /// (source, target) per directed edge.
    pub edge_index: Vec<(usize, usize)>,
    pub edge_features: Matrix,
    pub num_nodes: usize,
}

impl AttributedGraph {
    pub fn num_edges(&self) -> usize {
        self.edge_index.len()
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]` of the result.
    pub fn permute_nodes(&self, perm: &[usize]) -> AttributedGraph {
        assert_eq!(perm.len(), self.num_nodes);
        let mut nodes = Matrix::zeros(self.num_nodes, NODE_FEATURES);
        for (i, &p) in perm.iter().enumerate() {
            nodes.row_mut(p).copy_from_slice(self.node_features.row(i));
        }
        AttributedGraph {
            node_features: nodes,
            edge_index: self.edge_index.iter().map(|&(s, t)| (perm[s], perm[t])).collect(),
            edge_features: self.edge_features.clone(),
            num_nodes: self.num_nodes,
        }
    }
}

pub fn atom_flags(structure: &MolecularStructure, rings: &RingFlags) -> Vec<AtomFlags> {
    structure
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| AtomFlags {
            element: a.element,
            in_ring: rings.atom_in_ring[i],
            aromatic: a.aromatic,
            charge: a.formal_charge,
            hybridization: perceive_hybridization(structure, i),
            hydrogens: a.hydrogen_count(),
        })
        .collect()
}

/// Conjugated: aromatic, or both ends carry a multiple bond or are aromatic.
pub fn bond_flags(structure: &MolecularStructure, rings: &RingFlags) -> Vec<BondFlags> {
    let unsaturated: Vec<bool> = (0..structure.atoms.len())
        .map(|a| {
            structure.atoms[a].aromatic
                || structure.bonds.iter().any(|b| {
                    b.touches(a) && matches!(b.order, BondOrder::Double | BondOrder::Triple)
                })
        })
        .collect();
    structure
        .bonds
        .iter()
        .enumerate()
        .map(|(i, b)| BondFlags {
            order: b.order,
            conjugated: b.order == BondOrder::Aromatic || (unsaturated[b.begin] && unsaturated[b.end]),
            in_ring: rings.bond_in_ring[i],
        })
        .collect()
}

pub fn to_graph(structure: &MolecularStructure) -> Result<AttributedGraph, FeatureError> {
    let rings = perceive_rings(structure);
    let n = structure.atoms.len();
    let mut nodes = Matrix::zeros(n, NODE_FEATURES);
    for (i, flags) in atom_flags(structure, &rings).iter().enumerate() {
        nodes.row_mut(i).copy_from_slice(&node_features(i, flags)?);
    }
    let bonds = bond_flags(structure, &rings);
    let mut edges = Matrix::zeros(2 * bonds.len(), EDGE_FEATURES);
    let mut edge_index = Vec::with_capacity(2 * bonds.len());
    for (k, (bond, flags)) in structure.bonds.iter().zip(&bonds).enumerate() {
        let f = edge_features(flags);
        edges.row_mut(2 * k).copy_from_slice(&f);
        edges.row_mut(2 * k + 1).copy_from_slice(&f);
        edge_index.push((bond.begin, bond.end));
        edge_index.push((bond.end, bond.begin));
    }
    Ok(AttributedGraph {
        node_features: nodes,
        edge_index,
        edge_features: edges,
        num_nodes: n,
    })
}

/// Parse and featurize in one step.
pub fn featurize_smiles(smiles: &str) -> Result<AttributedGraph, crate::error::ModelError> {
    let structure = MolecularStructure::from_smiles(smiles)?;
    Ok(to_graph(&structure)?)
}

/// One CSV row per node, then one per directed edge. Node rows leave the
/// edge columns blank and vice versa.
pub fn write_feature_csv<W: Write>(graph: &AttributedGraph, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["kind", "index", "source", "target"];
    header.extend(NODE_FEATURE_NAMES);
    header.extend(EDGE_FEATURE_NAMES);
    w.write_record(&header)?;
    let blank_nodes = vec![String::new(); NODE_FEATURES];
    let blank_edges = vec![String::new(); EDGE_FEATURES];
    for i in 0..graph.num_nodes {
        let mut row = vec!["node".to_string(), i.to_string(), String::new(), String::new()];
        row.extend(graph.node_features.row(i).iter().map(|v| format!("{v}")));
        row.extend(blank_edges.iter().cloned());
        w.write_record(&row)?;
    }
    for (k, &(s, t)) in graph.edge_index.iter().enumerate() {
        let mut row = vec!["edge".to_string(), k.to_string(), s.to_string(), t.to_string()];
        row.extend(blank_nodes.iter().cloned());
        row.extend(graph.edge_features.row(k).iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mol(s: &str) -> MolecularStructure {
        MolecularStructure::from_smiles(s).unwrap()
    }

    /// Bridges by brute force: a bond is a bridge iff deleting it disconnects
    /// its endpoints.
    fn bridge_oracle(m: &MolecularStructure) -> Vec<bool> {
        (0..m.bonds.len())
            .map(|skip| {
                let (start, goal) = (m.bonds[skip].begin, m.bonds[skip].end);
                let mut seen = vec![false; m.atoms.len()];
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(v) = stack.pop() {
                    for (i, b) in m.bonds.iter().enumerate() {
                        if i != skip && b.touches(v) && !seen[b.other(v)] {
                            seen[b.other(v)] = true;
                            stack.push(b.other(v));
                        }
                    }
                }
                !seen[goal]
            })
            .collect()
    }

    #[test]
    fn rings_of_simple_molecules() {
        let r = perceive_rings(&mol("c1ccccc1"));
        assert!(r.atom_in_ring.iter().all(|&x| x));
        assert!(r.bond_in_ring.iter().all(|&x| x));
        let r = perceive_rings(&mol("CCO"));
        assert!(r.atom_in_ring.iter().all(|&x| !x));
        assert!(r.bond_in_ring.iter().all(|&x| !x));
    }

    #[test]
    fn methylcyclohexane_rings() {
        let m = mol("CC1CCCCC1");
        let r = perceive_rings(&m);
        assert_eq!(r.atom_in_ring, vec![false, true, true, true, true, true, true]);
        let expected: Vec<bool> = bridge_oracle(&m).iter().map(|b| !b).collect();
        assert_eq!(r.bond_in_ring, expected);
        assert!(!r.bond_in_ring[0]);
        assert_eq!(r.bond_in_ring.iter().filter(|&&x| x).count(), 6);
    }

    #[test]
    fn ring_flags_match_bridge_oracle() {
        for s in [
            "C1CC2CCC1C2",
            "c1ccc2ccccc2c1",
            "c1ccccc1-c1ccccc1",
            "CC(C)C1CCC(C)CC1",
            "C1CC1CC1CC1",
            "CCCC[n+]1ccccc1",
            "O",
        ] {
            let m = mol(s);
            let r = perceive_rings(&m);
            let oracle: Vec<bool> = bridge_oracle(&m).iter().map(|b| !b).collect();
            assert_eq!(r.bond_in_ring, oracle, "{s}");
        }
    }

    #[test]
    fn hybridization_rules() {
        let m = mol("CC");
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp3);
        let m = mol("c1ccccc1");
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp2);
        let m = mol("F[P-](F)(F)(F)(F)F");
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Sp3d2);
        let m = mol("CC#N");
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Sp);
        assert_eq!(perceive_hybridization(&m, 2), Hybridization::Sp);
        let m = mol("C=C=C");
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Sp);
        let m = mol("CC=O");
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Sp2);
        assert_eq!(perceive_hybridization(&m, 2), Hybridization::Sp2);
    }

    #[test]
    fn methyl_carbon_layout() {
        let flags = AtomFlags {
            element: Element::C,
            in_ring: false,
            aromatic: false,
            charge: 0,
            hybridization: Hybridization::Sp3,
            hydrogens: 3,
        };
        let v = node_features(0, &flags).unwrap();
        let hot: Vec<usize> = (0..NODE_FEATURES).filter(|&i| v[i] == 1.0).collect();
        assert_eq!(hot, vec![0, 12, 16, 21]);
        assert_eq!(v.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn tetrafluoroborate_boron_layout() {
        let g = to_graph(&mol("[B-](F)(F)(F)F")).unwrap();
        let b = g.node_features.row(0);
        let hot: Vec<usize> = (0..NODE_FEATURES).filter(|&i| b[i] == 1.0).collect();
        assert_eq!(hot, vec![7, 11, 16, 18]);
    }

    #[test]
    fn edge_layouts() {
        let g = to_graph(&mol("CCO")).unwrap();
        assert_eq!(g.edge_features.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g = to_graph(&mol("c1ccccc1")).unwrap();
        for k in 0..g.num_edges() {
            assert_eq!(g.edge_features.row(k), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn graph_sizes() {
        let g = to_graph(&mol("c1ccccc1")).unwrap();
        assert_eq!((g.num_nodes, g.num_edges()), (6, 12));
        let g = to_graph(&mol("O")).unwrap();
        assert_eq!((g.num_nodes, g.num_edges()), (1, 0));
        assert_eq!(g.node_features.row(0)[HCOUNT_BASE + 2], 1.0);
    }

    #[test]
    fn directed_twins_share_features() {
        let g = to_graph(&mol("CCCC[n+]1ccc(C#N)cc1")).unwrap();
        for k in 0..g.num_edges() / 2 {
            assert_eq!(g.edge_features.row(2 * k), g.edge_features.row(2 * k + 1));
            let (s, t) = g.edge_index[2 * k];
            assert_eq!(g.edge_index[2 * k + 1], (t, s));
        }
    }

    #[test]
    fn methane_is_rejected() {
        let e = to_graph(&mol("C")).unwrap_err();
        assert!(matches!(e, FeatureError::TooManyHydrogens { count: 4, .. }));
        let e = to_graph(&mol("[NH4+]")).unwrap_err();
        assert!(matches!(e, FeatureError::TooManyHydrogens { .. }));
    }

    #[test]
    fn conjugation_rule() {
        // butadiene: central single bond joins two unsaturated carbons
        let m = mol("C=CC=C");
        let r = perceive_rings(&m);
        let f = bond_flags(&m, &r);
        assert!(f.iter().all(|b| b.conjugated));
        let m = mol("C=CCC=C");
        let f = bond_flags(&m, &perceive_rings(&m));
        assert!(!f[1].conjugated && !f[2].conjugated);
    }

    #[test]
    fn csv_has_one_row_per_node_and_edge() {
        let g = to_graph(&mol("CCO")).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 4);
        assert!(lines[0].starts_with("kind,index,source,target,type_C"));
        assert!(lines[1].starts_with("node,0,,,1,"));
        assert!(lines[4].starts_with("edge,0,0,1,"));
    }
}
