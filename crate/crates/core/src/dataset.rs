//! Records, CSV ingest, temperature normalization, the two split protocols
//! and minibatching.
//!
//! CSV columns: `cation_smiles, anion_smiles, solute_smiles, temperature_K,
//! ln_gamma_inf, solute_family, cation_family`. Every distinct SMILES is
//! featurized once and cached; records refer to cached graphs by string.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, ModelError};
use crate::featurize::{featurize_smiles, AttributedGraph};
use crate::model::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub cation_smiles: String,
    pub anion_smiles: String,
    pub solute_smiles: String,
    /// Kelvin.
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(rename = "ln_gamma_inf")]
    pub ln_gamma: f64,
    pub solute_family: String,
    pub cation_family: String,
}

impl DataRecord {
    /// IL identity: `"cation.anion"`.
    pub fn il_key(&self) -> String {
        format!("{}.{}", self.cation_smiles, self.anion_smiles)
    }

    /// (IL, solute) combination.
    pub fn combination(&self) -> (String, String) {
        (self.il_key(), self.solute_smiles.clone())
    }

    pub fn molecules(&self) -> [&str; 3] {
        [&self.cation_smiles, &self.anion_smiles, &self.solute_smiles]
    }
}

/// Featurized graphs keyed by SMILES.
#[derive(Debug, Clone, Default)]
pub struct GraphCache {
    graphs: HashMap<String, AttributedGraph>,
}

impl GraphCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Featurizes `smiles` unless already cached.
    pub fn insert(&mut self, smiles: &str) -> Result<&AttributedGraph, ModelError> {
        if !self.graphs.contains_key(smiles) {
            let graph = featurize_smiles(smiles)?;
            self.graphs.insert(smiles.to_string(), graph);
        }
        Ok(&self.graphs[smiles])
    }

    pub fn get(&self, smiles: &str) -> Option<&AttributedGraph> {
        self.graphs.get(smiles)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Builds the model input for `record`; every SMILES must be cached.
    pub fn sample<'a>(&'a self, record: &'a DataRecord, scale: &TemperatureScale) -> Sample<'a> {
        let get = |s: &str| self.get(s).unwrap_or_else(|| panic!("SMILES '{s}' was never featurized"));
        Sample {
            record,
            cation: get(&record.cation_smiles),
            anion: get(&record.anion_smiles),
            solute: get(&record.solute_smiles),
            t_norm: scale.normalize(record.temperature),
        }
    }
}

/// Validated records plus the graph of every SMILES they mention.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<DataRecord>,
    pub graphs: GraphCache,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    cation_smiles: String,
    anion_smiles: String,
    solute_smiles: String,
    #[serde(rename = "temperature_K")]
    temperature: String,
    #[serde(rename = "ln_gamma_inf")]
    ln_gamma: String,
    solute_family: String,
    cation_family: String,
}

impl Dataset {
    /// Validates records and featurizes their molecules. `origin` names the
    /// source in diagnostics; records are numbered from line 2 (after the
    /// header) as they would be in a CSV.
    pub fn from_records(records: Vec<DataRecord>, origin: &str) -> Result<Self, DataError> {
        let mut graphs = GraphCache::new();
        for (i, r) in records.iter().enumerate() {
            validate_record(r, &mut graphs).map_err(|message| DataError::Row {
                path: origin.to_string(),
                line: i + 2,
                message,
            })?;
        }
        Ok(Dataset { records, graphs })
    }

    /// Reads a CSV file. The first invalid row aborts the load with its line
    /// number.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let file = File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, &path.display().to_string())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, origin: &str) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        let mut graphs = GraphCache::new();
        let headers = rdr.headers()?.clone();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let fail = |message: String| DataError::Row {
                path: origin.to_string(),
                line,
                message,
            };
            let raw: RawRow = row.deserialize(Some(&headers)).map_err(|e| fail(e.to_string()))?;
            let temperature: f64 = raw
                .temperature
                .parse()
                .map_err(|_| fail(format!("temperature_K '{}' is not a number", raw.temperature)))?;
            let ln_gamma: f64 = raw
                .ln_gamma
                .parse()
                .map_err(|_| fail(format!("ln_gamma_inf '{}' is not a number", raw.ln_gamma)))?;
            let record = DataRecord {
                cation_smiles: raw.cation_smiles,
                anion_smiles: raw.anion_smiles,
                solute_smiles: raw.solute_smiles,
                temperature,
                ln_gamma,
                solute_family: raw.solute_family,
                cation_family: raw.cation_family,
            };
            validate_record(&record, &mut graphs).map_err(fail)?;
            records.push(record);
        }
        Ok(Dataset { records, graphs })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&DataRecord> {
        indices.iter().map(|&i| &self.records[i]).collect()
    }

    pub fn samples<'a>(&'a self, indices: &[usize], scale: &TemperatureScale) -> Vec<Sample<'a>> {
        indices.iter().map(|&i| self.graphs.sample(&self.records[i], scale)).collect()
    }

    pub fn targets(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.records[i].ln_gamma).collect()
    }
}

fn validate_record(r: &DataRecord, graphs: &mut GraphCache) -> Result<(), String> {
    if !(r.temperature.is_finite() && r.temperature > 0.0) {
        return Err(format!("temperature_K must be positive, got {}", r.temperature));
    }
    if !r.ln_gamma.is_finite() {
        return Err(format!("ln_gamma_inf must be finite, got {}", r.ln_gamma));
    }
    if r.solute_family.is_empty() || r.cation_family.is_empty() {
        return Err("family labels must be non-empty".into());
    }
    for (column, smiles) in [
        ("cation_smiles", &r.cation_smiles),
        ("anion_smiles", &r.anion_smiles),
        ("solute_smiles", &r.solute_smiles),
    ] {
        graphs.insert(smiles).map_err(|e| format!("{column}: {e}"))?;
    }
    Ok(())
}

/// Writes records in the CSV schema read by [`Dataset::load`].
pub fn write_csv<'a, W: Write>(records: impl IntoIterator<Item = &'a DataRecord>, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Min-max temperature normalization frozen from a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureScale {
    pub t_min: f64,
    pub t_max: f64,
}

impl TemperatureScale {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self, DataError> {
        if !(t_max > t_min) {
            return Err(DataError::DegenerateTemperatureRange { t_min, t_max });
        }
        Ok(TemperatureScale { t_min, t_max })
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DataRecord>) -> Result<Self, DataError> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in records {
            lo = lo.min(r.temperature);
            hi = hi.max(r.temperature);
        }
        Self::new(lo, hi)
    }

    /// Not clamped: temperatures outside the training range extrapolate.
    pub fn normalize(&self, t: f64) -> f64 {
        (t - self.t_min) / (self.t_max - self.t_min)
    }

    pub fn is_extrapolation(&self, t: f64) -> bool {
        t < self.t_min || t > self.t_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Unseen IL–solute combinations of known molecules.
    Prediction,
    /// Every test record holds at least one molecule absent from training.
    Generalization,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prediction" => Ok(SplitMode::Prediction),
            "generalization" => Ok(SplitMode::Generalization),
            other => Err(format!("unknown split mode '{other}' (expected prediction or generalization)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
    /// Prediction mode: validation share of the non-test records.
    pub val_fraction: f64,
    /// Prediction mode without a membership list: share of IL–solute
    /// combinations sampled for test.
    pub test_fraction: f64,
    /// Generalization mode: share of unique molecules held out for test.
    pub test_molecule_fraction: f64,
    /// Generalization mode: share of the remaining molecules for validation.
    pub val_molecule_fraction: f64,
    /// Generalization mode: sample ions and solutes separately instead of
    /// from one pooled set.
    pub stratify_by_role: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: SplitMode::Prediction,
            seed: 0,
            val_fraction: 0.1,
            test_fraction: 0.1,
            test_molecule_fraction: 0.05,
            val_molecule_fraction: 0.05,
            stratify_by_role: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, f) in [
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
            ("test_molecule_fraction", self.test_molecule_fraction),
            ("val_molecule_fraction", self.val_molecule_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(DataError::Invalid(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

/// Record indices per split, each list ascending. Serialized as the split
/// manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub mode: SplitMode,
    pub seed: u64,
    pub num_records: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Checks that the three lists partition `0..num_records`.
    pub fn check_partition(&self) -> Result<(), DataError> {
        let mut seen = vec![false; self.num_records];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= self.num_records {
                return Err(DataError::Split(format!("index {i} beyond {} records", self.num_records)));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(DataError::Split(format!("record {i} appears in more than one split")));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::Split(format!("record {missing} is in no split")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("splits serialize")
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let io = |source| DataError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_json().as_bytes()).map_err(io)?;
        w.write_all(b"\n").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let splits: Splits = serde_json::from_str(&text)?;
        splits.check_partition()?;
        Ok(splits)
    }
}

/// Reads a test membership list: either a JSON array of record indices or a
/// split manifest, whose `test` list is used.
pub fn load_test_membership(path: &Path) -> Result<Vec<usize>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let list = if value.is_array() { value } else { value["test"].clone() };
    Ok(serde_json::from_value(list)?)
}

fn floor_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).floor() as usize
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Random 90/10-style split of `pool` (any order) into (train, val).
fn random_train_val(pool: &[usize], val_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut order = sorted(pool.to_vec());
    order.shuffle(rng);
    let n_val = floor_count(order.len(), val_fraction);
    let val = sorted(order[..n_val].to_vec());
    let train = sorted(order[n_val..].to_vec());
    (train, val)
}

/// Samples test records as whole IL–solute combinations: a `fraction` of the
/// distinct combinations (floor), all of their records.
pub fn sample_prediction_test(records: &[DataRecord], fraction: f64, seed: u64) -> Vec<usize> {
    let combos: BTreeSet<(String, String)> = records.iter().map(DataRecord::combination).collect();
    let mut combos: Vec<_> = combos.into_iter().collect();
    combos.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let chosen: BTreeSet<_> = combos.into_iter().take(floor_count_of(records, fraction)).collect();
    (0..records.len()).filter(|&i| chosen.contains(&records[i].combination())).collect()
}

fn floor_count_of(records: &[DataRecord], fraction: f64) -> usize {
    let n = records.iter().map(DataRecord::combination).collect::<BTreeSet<_>>().len();
    floor_count(n, fraction)
}

/// Prediction protocol: the given test records stay fixed; the rest is split
/// at random into train and validation. Fails if any IL–solute combination
/// occurs both in test and outside it.
pub fn split_prediction(
    records: &[DataRecord],
    test: &[usize],
    seed: u64,
    val_fraction: f64,
) -> Result<Splits, DataError> {
    let n = records.len();
    let mut in_test = vec![false; n];
    for &i in test {
        if i >= n {
            return Err(DataError::Split(format!("test index {i} beyond {n} records")));
        }
        if std::mem::replace(&mut in_test[i], true) {
            return Err(DataError::Split(format!("test index {i} listed twice")));
        }
    }
    let test_combos: BTreeSet<_> = test.iter().map(|&i| records[i].combination()).collect();
    let pool: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    if let Some(&i) = pool.iter().find(|&&i| test_combos.contains(&records[i].combination())) {
        let (il, solute) = records[i].combination();
        return Err(DataError::Split(format!(
            "combination of IL '{il}' and solute '{solute}' is in test and in record {i} outside test"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, val) = random_train_val(&pool, val_fraction, &mut rng);
    Ok(Splits {
        mode: SplitMode::Prediction,
        seed,
        num_records: n,
        train,
        val,
        test: sorted(test.to_vec()),
    })
}

fn ion_smiles(r: &DataRecord) -> [&str; 2] {
    [&r.cation_smiles, &r.anion_smiles]
}

/// Draws `fraction` (floor) of the molecules occurring in `indices`.
fn sample_molecules(
    records: &[DataRecord],
    indices: &[usize],
    fraction: f64,
    stratify: bool,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<String> {
    let mut draw = |pool: BTreeSet<&str>| -> Vec<String> {
        let mut pool: Vec<&str> = pool.into_iter().collect();
        pool.shuffle(rng);
        let k = floor_count(pool.len(), fraction);
        pool[..k].iter().map(|s| s.to_string()).collect()
    };
    if stratify {
        let ions: BTreeSet<&str> = indices.iter().flat_map(|&i| ion_smiles(&records[i])).collect();
        let solutes: BTreeSet<&str> = indices.iter().map(|&i| records[i].solute_smiles.as_str()).collect();
        let mut out: BTreeSet<String> = draw(ions).into_iter().collect();
        out.extend(draw(solutes));
        out
    } else {
        let pooled: BTreeSet<&str> = indices.iter().flat_map(|&i| records[i].molecules()).collect();
        draw(pooled).into_iter().collect()
    }
}

fn split_off_molecules(records: &[DataRecord], pool: &[usize], held: &BTreeSet<String>) -> (Vec<usize>, Vec<usize>) {
    pool.iter()
        .partition(|&&i| records[i].molecules().iter().any(|m| held.contains(*m)))
}

/// Generalization protocol: a share of all unique molecules (ions and
/// solutes pooled, or per role) is held out and every record touching one
/// goes to test; validation is drawn the same way from the remainder.
pub fn split_generalization(records: &[DataRecord], spec: &SplitSpec) -> Result<Splits, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let all: Vec<usize> = (0..records.len()).collect();
    let test_mols = sample_molecules(records, &all, spec.test_molecule_fraction, spec.stratify_by_role, &mut rng);
    let (test, rest) = split_off_molecules(records, &all, &test_mols);
    let (val, train) = generalization_val(records, &rest, spec, &mut rng);
    Ok(Splits {
        mode: SplitMode::Generalization,
        seed: spec.seed,
        num_records: records.len(),
        train,
        val,
        test,
    })
}

fn generalization_val(
    records: &[DataRecord],
    pool: &[usize],
    spec: &SplitSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let val_mols = sample_molecules(records, pool, spec.val_molecule_fraction, spec.stratify_by_role, rng);
    split_off_molecules(records, pool, &val_mols)
}

/// Any split according to `spec`; prediction mode uses `test` when given and
/// otherwise samples test combinations.
pub fn split(records: &[DataRecord], spec: &SplitSpec, test: Option<&[usize]>) -> Result<Splits, DataError> {
    spec.validate()?;
    match spec.mode {
        SplitMode::Prediction => {
            let sampled;
            let test = match test {
                Some(t) => t,
                None => {
                    sampled = sample_prediction_test(records, spec.test_fraction, spec.seed);
                    &sampled
                }
            };
            split_prediction(records, test, spec.seed, spec.val_fraction)
        }
        SplitMode::Generalization => split_generalization(records, spec),
    }
}

/// Fresh train/validation split of the non-test records with a new seed, as
/// used for each ensemble member. The test list is kept as is.
pub fn resplit_train_val(records: &[DataRecord], base: &Splits, spec: &SplitSpec, seed: u64) -> Result<Splits, DataError> {
    spec.validate()?;
    let pool = sorted(base.train.iter().chain(&base.val).copied().collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, val) = match base.mode {
        SplitMode::Prediction => random_train_val(&pool, spec.val_fraction, &mut rng),
        SplitMode::Generalization => {
            let (val, train) = generalization_val(records, &pool, spec, &mut rng);
            (train, val)
        }
    };
    Ok(Splits {
        mode: base.mode,
        seed,
        num_records: base.num_records,
        train,
        val,
        test: base.test.clone(),
    })
}

/// Shuffled minibatches of `indices`; the last batch may be short.
pub fn batches<R: Rng + ?Sized>(indices: &[usize], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order = indices.to_vec();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Small synthetic IL/solute corpus with a smooth, learnable target.
pub mod synthetic {
    use super::*;

    /// (SMILES, family)
    pub const CATIONS: [(&str, &str); 10] = [
        ("C[n+]1ccn(C)c1", "imidazolium"),
        ("CC[n+]1ccn(C)c1", "imidazolium"),
        ("CCCC[n+]1ccn(C)c1", "imidazolium"),
        ("CCCCCC[n+]1ccn(C)c1", "imidazolium"),
        ("CCCCCCCC[n+]1ccn(C)c1", "imidazolium"),
        ("CC[n+]1ccccc1", "pyridinium"),
        ("CCCC[n+]1ccccc1", "pyridinium"),
        ("CCCC[N+](C)(C)C", "ammonium"),
        ("CCCC[N+]1(C)CCCC1", "pyrrolidinium"),
        ("CCCC[P+](CCCC)(CCCC)CCCC", "phosphonium"),
    ];

    pub const ANIONS: [&str; 6] = [
        "[Cl-]",
        "[Br-]",
        "[B-](F)(F)(F)F",
        "F[P-](F)(F)(F)(F)F",
        "FC(F)(F)S(=O)(=O)[N-]S(=O)(=O)C(F)(F)F",
        "[O-]S(=O)(=O)C(F)(F)F",
    ];

    pub const SOLUTES: [(&str, &str); 24] = [
        ("CC", "alkanes"),
        ("CCC", "alkanes"),
        ("CCCC", "alkanes"),
        ("CCCCC", "alkanes"),
        ("CCCCCC", "alkanes"),
        ("CCCCCCC", "alkanes"),
        ("C1CCCCC1", "cycloalkanes"),
        ("C=CCCCC", "alkenes"),
        ("c1ccccc1", "aromatics"),
        ("Cc1ccccc1", "aromatics"),
        ("CCc1ccccc1", "aromatics"),
        ("Cc1ccccc1C", "aromatics"),
        ("CO", "alcohols"),
        ("CCO", "alcohols"),
        ("CCCO", "alcohols"),
        ("CC(C)O", "alcohols"),
        ("CCCCO", "alcohols"),
        ("O", "water"),
        ("CC(C)=O", "ketones"),
        ("CCOCC", "ethers"),
        ("ClC(Cl)Cl", "halocarbons"),
        ("CC#N", "nitriles"),
        ("C1CCOC1", "ethers"),
        ("c1ccncc1", "amines"),
    ];

    fn heavy_atoms(smiles: &str) -> usize {
        crate::smiles::MolecularStructure::from_smiles(smiles)
            .expect("synthetic SMILES parse")
            .atoms
            .len()
    }

    /// ln γ as a smooth function of temperature and the heavy-atom counts
    /// of solute and IL.
    pub fn target(temperature: f64, solute_atoms: usize, il_atoms: usize) -> f64 {
        let x = 298.15 / temperature;
        let s = solute_atoms as f64;
        let il = il_atoms as f64;
        -0.6 + 0.25 * s * x - 0.04 * il + 0.3 * x
    }

    /// `n` records drawn uniformly over the 40-molecule pool with
    /// temperatures in [298.15, 368.15] K.
    pub fn generate(n: usize, seed: u64) -> Vec<DataRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (cation, cation_family) = CATIONS[rng.gen_range(0..CATIONS.len())];
                let anion = ANIONS[rng.gen_range(0..ANIONS.len())];
                let (solute, solute_family) = SOLUTES[rng.gen_range(0..SOLUTES.len())];
                let temperature = (rng.gen_range(298.15..=368.15f64) * 100.0).round() / 100.0;
                let ln_gamma = target(temperature, heavy_atoms(solute), heavy_atoms(cation) + heavy_atoms(anion));
                DataRecord {
                    cation_smiles: cation.into(),
                    anion_smiles: anion.into(),
                    solute_smiles: solute.into(),
                    temperature,
                    ln_gamma,
                    solute_family: solute_family.into(),
                    cation_family: cation_family.into(),
                }
            })
            .collect()
    }
}
