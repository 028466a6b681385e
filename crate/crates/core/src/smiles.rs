//! SMILES reading for the small slice of chemistry found in ionic-liquid
//! activity-coefficient data sets.
//!
//! The pipeline is `tokenize` → `parse` → `assign_implicit_hydrogens` →
//! `normalize_aromaticity`; [`MolecularStructure::from_smiles`] runs all four.
//! Only single-component SMILES over the nine supported elements are
//! accepted. Stereo marks are read and dropped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SmilesError;

/// Supported elements, in feature-slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    O,
    N,
    F,
    S,
    Cl,
    P,
    B,
    Br,
}

impl Element {
    pub const ALL: [Element; 9] = [
        Element::C,
        Element::O,
        Element::N,
        Element::F,
        Element::S,
        Element::Cl,
        Element::P,
        Element::B,
        Element::Br,
    ];

    /// Position of this element in the atom-type one-hot block.
    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::O => "O",
            Element::N => "N",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::P => "P",
            Element::B => "B",
            Element::Br => "Br",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    /// Allowed valences for organic-subset atoms, smallest first.
    pub fn default_valences(self) -> &'static [u32] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br => &[1],
        }
    }

    fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order counted in half units (aromatic = 1.5 → 3).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn slot(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomToken {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// `Some` for bracket atoms, which always state their hydrogen count.
    pub explicit_h: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`; read as single, direction discarded.
    Directional,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Directional => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Atom(AtomToken),
    Bond(BondSymbol),
    BranchOpen,
    BranchClose,
    RingClosure(u32),
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token in the source string.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
    /// Byte offset in the source SMILES.
    pub offset: usize,
}

impl Atom {
    /// Hydrogen count from whichever source is authoritative for this atom.
    pub fn hydrogen_count(&self) -> u8 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }

    pub fn touches(&self, atom: usize) -> bool {
        self.begin == atom || self.end == atom
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularStructure {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub source_smiles: String,
}

impl MolecularStructure {
    /// Full reading pipeline: tokens, graph, hydrogens, aromatic normalization.
    pub fn from_smiles(smiles: &str) -> Result<Self, SmilesError> {
        let tokens = tokenize(smiles)?;
        let structure = parse(smiles, &tokens)?;
        let structure = assign_implicit_hydrogens(structure)?;
        Ok(normalize_aromaticity(structure))
    }

    pub fn total_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.formal_charge as i32).sum()
    }

    /// Bond indices incident to each atom, in bond order.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.atoms.len()];
        for (i, b) in self.bonds.iter().enumerate() {
            inc[b.begin].push(i);
            inc[b.end].push(i);
        }
        inc
    }
}

fn err(input: &str, offset: usize, message: impl Into<String>) -> SmilesError {
    SmilesError {
        input: input.to_string(),
        offset,
        message: message.into(),
    }
}

pub fn tokenize(smiles: &str) -> Result<Vec<Token>, SmilesError> {
    if smiles.is_empty() {
        return Err(err(smiles, 0, "empty SMILES"));
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let offset = i;
        let c = bytes[i];
        let kind = match c {
            b'[' => {
                let close = smiles[i..]
                    .find(']')
                    .map(|p| p + i)
                    .ok_or_else(|| err(smiles, offset, "unterminated bracket atom"))?;
                let atom = bracket_atom(smiles, i + 1, close)?;
                i = close + 1;
                tokens.push(Token {
                    kind: TokenKind::Atom(atom),
                    offset,
                });
                continue;
            }
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 1;
                organic(Element::Br, false)
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 1;
                organic(Element::Cl, false)
            }
            b'B' => organic(Element::B, false),
            b'C' => organic(Element::C, false),
            b'N' => organic(Element::N, false),
            b'O' => organic(Element::O, false),
            b'P' => organic(Element::P, false),
            b'S' => organic(Element::S, false),
            b'F' => organic(Element::F, false),
            b'b' => organic(Element::B, true),
            b'c' => organic(Element::C, true),
            b'n' => organic(Element::N, true),
            b'o' => organic(Element::O, true),
            b'p' => organic(Element::P, true),
            b's' => organic(Element::S, true),
            b'I' => return Err(err(smiles, offset, "element I is not supported")),
            b'-' => TokenKind::Bond(BondSymbol::Single),
            b'=' => TokenKind::Bond(BondSymbol::Double),
            b'#' => TokenKind::Bond(BondSymbol::Triple),
            b':' => TokenKind::Bond(BondSymbol::Aromatic),
            b'/' | b'\\' => TokenKind::Bond(BondSymbol::Directional),
            b'(' => TokenKind::BranchOpen,
            b')' => TokenKind::BranchClose,
            b'.' => TokenKind::Dot,
            b'0'..=b'9' => TokenKind::RingClosure((c - b'0') as u32),
            b'%' => {
                let digits = smiles
                    .get(i + 1..i + 3)
                    .filter(|d| d.bytes().all(|b| b.is_ascii_digit()))
                    .ok_or_else(|| err(smiles, offset, "'%' must be followed by two digits"))?;
                i += 2;
                TokenKind::RingClosure(digits.parse().expect("two ascii digits"))
            }
            _ => {
                let ch = smiles[i..].chars().next().unwrap_or('?');
                return Err(err(smiles, offset, format!("unexpected character '{ch}'")));
            }
        };
        tokens.push(Token { kind, offset });
        i += 1;
    }
    Ok(tokens)
}

fn organic(element: Element, aromatic: bool) -> TokenKind {
    TokenKind::Atom(AtomToken {
        element,
        aromatic,
        charge: 0,
        explicit_h: None,
    })
}

/// Parses the interior of `[...]`, i.e. `smiles[start..end]`.
fn bracket_atom(smiles: &str, start: usize, end: usize) -> Result<AtomToken, SmilesError> {
    let body = &smiles.as_bytes()[start..end];
    let mut pos = 0;
    let at = |p: usize| start + p;

    if body.first().is_some_and(|b| b.is_ascii_digit()) {
        return Err(err(smiles, at(0), "isotopes are not supported"));
    }

    let (element, aromatic) = match body.get(pos) {
        Some(b) if b.is_ascii_uppercase() => {
            let two = body
                .get(pos + 1)
                .filter(|n| n.is_ascii_lowercase())
                .map(|n| format!("{}{}", *b as char, *n as char));
            match two.as_deref().and_then(Element::from_symbol) {
                Some(e) => {
                    pos += 2;
                    (e, false)
                }
                None => {
                    if body.get(pos + 1).is_some_and(|n| n.is_ascii_lowercase()) {
                        let sym = String::from_utf8_lossy(&body[pos..pos + 2]).into_owned();
                        return Err(err(smiles, at(pos), format!("element {sym} is not supported")));
                    }
                    let sym = (*b as char).to_string();
                    let e = Element::from_symbol(&sym).ok_or_else(|| {
                        err(smiles, at(pos), format!("element {sym} is not supported"))
                    })?;
                    pos += 1;
                    (e, false)
                }
            }
        }
        Some(b) if b.is_ascii_lowercase() => {
            if body.get(pos + 1).is_some_and(|n| n.is_ascii_lowercase()) {
                let sym = String::from_utf8_lossy(&body[pos..pos + 2]).into_owned();
                return Err(err(smiles, at(pos), format!("aromatic element {sym} is not supported")));
            }
            let sym = (*b as char).to_ascii_uppercase().to_string();
            let e = Element::from_symbol(&sym)
                .filter(|e| e.can_be_aromatic())
                .ok_or_else(|| {
                    err(smiles, at(pos), format!("aromatic element {} is not supported", *b as char))
                })?;
            pos += 1;
            (e, true)
        }
        _ => return Err(err(smiles, at(pos), "bracket atom without element symbol")),
    };

    // chirality: '@', '@@', or '@' followed by a class tag such as TH1
    while body.get(pos) == Some(&b'@') {
        pos += 1;
        while body.get(pos).is_some_and(|b| b.is_ascii_uppercase() && *b != b'H') {
            pos += 1;
        }
        while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
    }

    let mut h = 0u8;
    if body.get(pos) == Some(&b'H') {
        pos += 1;
        h = 1;
        let digits_start = pos;
        while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos > digits_start {
            h = std::str::from_utf8(&body[digits_start..pos])
                .ok()
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| err(smiles, at(digits_start), "bad hydrogen count"))?;
        }
    }

    let mut charge: i32 = 0;
    if let Some(&sign @ (b'+' | b'-')) = body.get(pos) {
        let unit = if sign == b'+' { 1 } else { -1 };
        pos += 1;
        let digits_start = pos;
        while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos > digits_start {
            let n: i32 = std::str::from_utf8(&body[digits_start..pos])
                .ok()
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| err(smiles, at(digits_start), "bad charge"))?;
            charge = unit * n;
        } else {
            charge = unit;
            while body.get(pos) == Some(&sign) {
                charge += unit;
                pos += 1;
            }
        }
    }
    if !(-1..=1).contains(&charge) {
        return Err(err(
            smiles,
            at(0),
            format!("formal charge {charge} outside the supported range -1..=1"),
        ));
    }

    // atom class ':n' carries no chemistry
    if body.get(pos) == Some(&b':') {
        pos += 1;
        while body.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
    }
    if pos != body.len() {
        return Err(err(smiles, at(pos), "unexpected content in bracket atom"));
    }

    Ok(AtomToken {
        element,
        aromatic,
        charge: charge as i8,
        explicit_h: Some(h),
    })
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSymbol>,
    offset: usize,
}

pub fn parse(smiles: &str, tokens: &[Token]) -> Result<MolecularStructure, SmilesError> {
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSymbol, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();

    for token in tokens {
        match &token.kind {
            TokenKind::Atom(a) => {
                let idx = atoms.len();
                atoms.push(Atom {
                    element: a.element,
                    formal_charge: a.charge,
                    aromatic: a.aromatic,
                    explicit_h: a.explicit_h,
                    implicit_h: 0,
                    offset: token.offset,
                });
                if let Some(p) = prev {
                    let symbol = pending.take().map(|(s, _)| s);
                    add_bond(smiles, &atoms, &mut bonds, p, idx, symbol, token.offset)?;
                } else if let Some((_, off)) = pending {
                    return Err(err(smiles, off, "bond symbol without a preceding atom"));
                }
                prev = Some(idx);
            }
            TokenKind::Bond(b) => {
                if pending.is_some() {
                    return Err(err(smiles, token.offset, "two consecutive bond symbols"));
                }
                if prev.is_none() {
                    return Err(err(smiles, token.offset, "bond symbol without a preceding atom"));
                }
                pending = Some((*b, token.offset));
            }
            TokenKind::BranchOpen => {
                if let Some((_, off)) = pending {
                    return Err(err(smiles, off, "bond symbol not followed by an atom"));
                }
                let p = prev.ok_or_else(|| err(smiles, token.offset, "branch without a preceding atom"))?;
                branches.push((p, token.offset));
            }
            TokenKind::BranchClose => {
                if let Some((_, off)) = pending {
                    return Err(err(smiles, off, "bond symbol not followed by an atom"));
                }
                let (p, _) = branches
                    .pop()
                    .ok_or_else(|| err(smiles, token.offset, "unbalanced ')'"))?;
                prev = Some(p);
            }
            TokenKind::RingClosure(digit) => {
                let p = prev.ok_or_else(|| {
                    err(smiles, token.offset, "ring closure without a preceding atom")
                })?;
                let symbol = pending.take().map(|(s, _)| s);
                match rings.remove(digit) {
                    Some(open) => {
                        if open.atom == p {
                            return Err(err(smiles, token.offset, "ring closure bonds an atom to itself"));
                        }
                        let symbol = match (open.bond, symbol) {
                            (Some(a), Some(b)) if a.order() != b.order() => {
                                return Err(err(smiles, token.offset, "conflicting ring-closure bond symbols"))
                            }
                            (a, b) => b.or(a),
                        };
                        // the closure bond begins at the closing atom
                        add_bond(smiles, &atoms, &mut bonds, p, open.atom, symbol, token.offset)?;
                    }
                    None => {
                        rings.insert(
                            *digit,
                            OpenRing {
                                atom: p,
                                bond: symbol,
                                offset: token.offset,
                            },
                        );
                    }
                }
            }
            TokenKind::Dot => {
                return Err(err(
                    smiles,
                    token.offset,
                    "multi-component SMILES are not accepted; give each ion separately",
                ))
            }
        }
    }

    if let Some((_, off)) = pending {
        return Err(err(smiles, off, "bond symbol not followed by an atom"));
    }
    if let Some((_, off)) = branches.last() {
        return Err(err(smiles, *off, "unbalanced '('"));
    }
    if let Some((digit, open)) = rings.iter().next() {
        return Err(err(smiles, open.offset, format!("ring closure {digit} is never closed")));
    }
    if atoms.is_empty() {
        return Err(err(smiles, 0, "no atoms"));
    }

    Ok(MolecularStructure {
        atoms,
        bonds,
        source_smiles: smiles.to_string(),
    })
}

fn add_bond(
    smiles: &str,
    atoms: &[Atom],
    bonds: &mut Vec<Bond>,
    a: usize,
    b: usize,
    symbol: Option<BondSymbol>,
    offset: usize,
) -> Result<(), SmilesError> {
    if bonds.iter().any(|x| x.touches(a) && x.touches(b)) {
        return Err(err(smiles, offset, "duplicate bond between the same atoms"));
    }
    let both_aromatic = atoms[a].aromatic && atoms[b].aromatic;
    let order = match symbol {
        Some(s) => s.order(),
        None if both_aromatic => BondOrder::Aromatic,
        None => BondOrder::Single,
    };
    if order == BondOrder::Aromatic && !both_aromatic {
        return Err(err(smiles, offset, "aromatic bond between non-aromatic atoms"));
    }
    bonds.push(Bond {
        begin: a,
        end: b,
        order,
    });
    Ok(())
}

/// Fills in `implicit_h` for organic-subset atoms.
///
/// Bond orders are summed with aromatic bonds at 1.5. The first allowed valence
/// that accommodates the sum wins; an aromatic atom whose sum overshoots only
/// because of the half-bond surplus is rounded down to that valence (0 H), which
/// covers furan-type O/S and substituted ring N.
pub fn assign_implicit_hydrogens(
    mut structure: MolecularStructure,
) -> Result<MolecularStructure, SmilesError> {
    let n = structure.atoms.len();
    let mut sum2 = vec![0u32; n];
    let mut low2 = vec![0u32; n];
    for b in &structure.bonds {
        for end in [b.begin, b.end] {
            sum2[end] += b.order.half_units();
            low2[end] += b.order.half_units().min(if b.order == BondOrder::Aromatic { 2 } else { u32::MAX });
        }
    }
    for (i, atom) in structure.atoms.iter_mut().enumerate() {
        if atom.explicit_h.is_some() {
            continue;
        }
        let mut assigned = None;
        for &v in atom.element.default_valences() {
            let v2 = 2 * v;
            if sum2[i] <= v2 {
                assigned = Some((v2 - sum2[i]) / 2);
                break;
            }
            if atom.aromatic && low2[i] <= v2 {
                assigned = Some(0);
                break;
            }
        }
        let h = assigned.ok_or_else(|| {
            err(
                &structure.source_smiles,
                atom.offset,
                format!(
                    "bond order sum {} exceeds the largest valence of {}",
                    sum2[i] as f64 / 2.0,
                    atom.element
                ),
            )
        })?;
        atom.implicit_h = h as u8;
    }
    Ok(structure)
}

/// Rewrites Kekulé six-membered rings as aromatic.
///
/// A ring qualifies when each of its atoms is already aromatic or carries
/// exactly one double bond, and that double bond lies in the ring. Rings are
/// revisited until nothing changes so fused systems resolve ring by ring.
pub fn normalize_aromaticity(mut structure: MolecularStructure) -> MolecularStructure {
    let rings = six_membered_rings(&structure);
    if rings.is_empty() {
        return structure;
    }
    let incidence = structure.incidence();
    loop {
        let mut changed = false;
        for ring in &rings {
            let ring_bonds = ring_bond_indices(&structure, ring);
            if ring_bonds.iter().all(|&b| structure.bonds[b].order == BondOrder::Aromatic) {
                continue;
            }
            let qualifies = ring.iter().all(|&atom| {
                if structure.atoms[atom].aromatic {
                    return true;
                }
                let doubles: Vec<usize> = incidence[atom]
                    .iter()
                    .copied()
                    .filter(|&b| structure.bonds[b].order == BondOrder::Double)
                    .collect();
                doubles.len() == 1 && ring_bonds.contains(&doubles[0])
            }) && ring_bonds
                .iter()
                .all(|&b| structure.bonds[b].order != BondOrder::Triple)
                && ring
                    .iter()
                    .all(|&a| structure.atoms[a].element.can_be_aromatic());
            if qualifies {
                for &a in ring {
                    structure.atoms[a].aromatic = true;
                }
                for &b in &ring_bonds {
                    structure.bonds[b].order = BondOrder::Aromatic;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    structure
}

fn ring_bond_indices(structure: &MolecularStructure, ring: &[usize]) -> Vec<usize> {
    (0..ring.len())
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            structure
                .bonds
                .iter()
                .position(|x| x.touches(a) && x.touches(b))
                .expect("ring walk follows bonds")
        })
        .collect()
}

/// All simple 6-cycles, each reported once as an atom walk starting at its
/// smallest atom index.
fn six_membered_rings(structure: &MolecularStructure) -> Vec<Vec<usize>> {
    let n = structure.atoms.len();
    let mut adj = vec![Vec::new(); n];
    for b in &structure.bonds {
        adj[b.begin].push(b.end);
        adj[b.end].push(b.begin);
    }
    let mut rings = Vec::new();
    let mut path = Vec::with_capacity(6);
    for start in 0..n {
        path.clear();
        path.push(start);
        extend_cycle(&adj, start, &mut path, &mut rings);
    }
    rings
}

fn extend_cycle(adj: &[Vec<usize>], start: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let last = *path.last().expect("path starts non-empty");
    for &next in &adj[last] {
        if path.len() == 6 {
            // close only in one direction to avoid reporting mirrored walks
            if next == start && path[1] < path[5] {
                out.push(path.clone());
            }
            continue;
        }
        if next <= start || path.contains(&next) {
            continue;
        }
        path.push(next);
        extend_cycle(adj, start, path, out);
        path.pop();
    }
}
