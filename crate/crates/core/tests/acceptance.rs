//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any runnable criterion fails.
//!
//! Criteria 8–11 need the published dataset: set `ILGAMMA_DATASET` to its CSV
//! and `ILGAMMA_TEST_MANIFEST` to the prediction-split test membership (JSON
//! index list or split manifest). Without them those criteria are reported
//! as not reproducible and a synthetic benchmark runs instead.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use ilgamma_core::dataset::{
    load_test_membership, sample_prediction_test, split, split_generalization, split_prediction, synthetic,
    DataRecord, Dataset, SplitMode, SplitSpec, TemperatureScale,
};
use ilgamma_core::ensemble::{train_ensemble, train_model, EnsembleConfig, ModelChoice};
use ilgamma_core::evaluate::{mape, space_metrics, MetricReport};
use ilgamma_core::featurize::{featurize_smiles, write_feature_csv};
use ilgamma_core::gnn::{GnnConfig, GnnModel};
use ilgamma_core::mcm::{McmConfig, McmModel, Vocabulary};
use ilgamma_core::model::{predict_records, Regressor, Sample};
use ilgamma_core::tensor::Tape;
use ilgamma_core::trainer::{evaluate_loss, train, EarlyStopping, PlateauScheduler, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

fn loss_of<M: Regressor>(model: &M, samples: &[Sample<'_>], targets: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let pred = model.forward_batch(&mut tape, samples, false, &mut rng).unwrap();
    let loss = tape.mse(pred, targets).unwrap();
    tape.value(loss).item()
}

/// Largest relative error between backprop and central differences over
/// randomly drawn scalar parameters, drawing until `count` of them have a
/// gradient above 1e-7 in magnitude. Returns (drawn, informative, worst).
fn gradient_check<M: Regressor>(
    model: &mut M,
    samples: &[Sample<'_>],
    targets: &[f64],
    count: usize,
    seed: u64,
) -> (usize, usize, f64) {
    let mut tape = Tape::new();
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let pred = model.forward_batch(&mut tape, samples, false, &mut rng).unwrap();
    let loss = tape.mse(pred, targets).unwrap();
    let grads = tape.backward(loss).unwrap().for_params(&tape, model.params());

    let mut pick = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().ids().collect();
    let total = model.params().num_scalars();
    let h = 1e-5;
    let (mut drawn, mut informative) = (0, 0);
    let mut worst: f64 = 0.0;
    while informative < count && drawn < 100 * count {
        // every scalar equally likely
        let mut k = pick.gen_range(0..total);
        let mut which = 0;
        while k >= model.params().value(ids[which]).len() {
            k -= model.params().value(ids[which]).len();
            which += 1;
        }
        let id = ids[which];
        let orig = model.params().value(id).as_slice()[k];
        model.params_mut().value_mut(id).as_mut_slice()[k] = orig + h;
        let up = loss_of(model, samples, targets);
        model.params_mut().value_mut(id).as_mut_slice()[k] = orig - h;
        let down = loss_of(model, samples, targets);
        model.params_mut().value_mut(id).as_mut_slice()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads[which].as_slice()[k];
        let scale = analytic.abs().max(numeric.abs());
        drawn += 1;
        if scale > 1e-7 {
            informative += 1;
        }
        worst = worst.max((analytic - numeric).abs() / scale.max(1e-7));
    }
    (drawn, informative, worst)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let records = synthetic::generate(12, 101);
    let data = Dataset::from_records(records, "synthetic").map_err(|e| e.to_string())?;
    let scale = TemperatureScale::from_records(&data.records).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let samples = data.samples(&idx, &scale);
    let targets = data.targets(&idx);

    let mut gnn = GnnModel::new(GnnConfig::default(), 5).unwrap();
    // nudge ε and the biases off zero so their gradients are exercised too
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for id in gnn.store.ids().collect::<Vec<_>>() {
        let name = gnn.store.name(id).to_string();
        if name.ends_with(".eps") || name.ends_with(".b") || name.contains("b_") {
            for v in gnn.store.value_mut(id).as_mut_slice() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let (d_gnn, n_gnn, worst_gnn) = gradient_check(&mut gnn, &samples, &targets, 60, 1);

    let vocab = Vocabulary::build(&data.records).unwrap();
    let mut mcm = McmModel::new(McmConfig::default(), vocab, 6).unwrap();
    for id in mcm.store.ids().collect::<Vec<_>>() {
        if mcm.store.name(id).ends_with(".b") {
            for v in mcm.store.value_mut(id).as_mut_slice() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let (d_mcm, n_mcm, worst_mcm) = gradient_check(&mut mcm, &samples, &targets, 60, 2);
    let secs = started.elapsed().as_secs_f64();
    let summary = format!(
        "GNN {n_gnn} informative of {d_gnn} drawn params, max rel err {worst_gnn:.2e}; \
         MCM {n_mcm} of {d_mcm}, max rel err {worst_mcm:.2e}; {secs:.1} s"
    );
    check(n_gnn >= 50 && n_mcm >= 50, format!("too few informative parameters: {summary}"))?;
    check(worst_gnn < 1e-4 && worst_mcm < 1e-4, summary.clone())?;
    check(secs < 60.0, format!("too slow: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/features");
    let corpus = std::fs::read_to_string(dir.join("corpus.tsv")).map_err(|e| e.to_string())?;
    let mut n = 0;
    for line in corpus.lines() {
        let (name, smiles) = line.split_once('\t').ok_or("malformed corpus line")?;
        let g = featurize_smiles(smiles).map_err(|e| format!("{name}: {e}"))?;
        check(g.node_features.cols() == 22 && g.edge_features.cols() == 6, format!("{name}: widths"))?;
        for i in 0..g.num_nodes {
            let r = g.node_features.row(i);
            for (a, b) in [(0, 9), (11, 14), (14, 18), (18, 22)] {
                check(r[a..b].iter().sum::<f64>() == 1.0, format!("{name}: node {i} group {a}..{b}"))?;
            }
        }
        for k in 0..g.num_edges() {
            check(g.edge_features.row(k)[..4].iter().sum::<f64>() == 1.0, format!("{name}: edge {k}"))?;
        }
        let mut out = Vec::new();
        write_feature_csv(&g, &mut out).unwrap();
        let expected = std::fs::read_to_string(dir.join(format!("{name}.csv"))).map_err(|e| e.to_string())?;
        check(out == expected.as_bytes(), format!("{name}: differs from reference file"))?;
        n += 1;
    }
    check(n >= 25, format!("only {n} corpus molecules"))?;
    Ok(format!("{n} molecules match reference files; 22/6-wide vectors, one-hot groups sum to 1"))
}

// ---------------------------------------------------------------- 3

const EQUIVALENT_PAIRS: [(&str, &str); 10] = [
    ("CCO", "OCC"),
    ("Cc1ccccc1", "c1ccccc1C"),
    ("c1ccccc1", "C1=CC=CC=C1"),
    ("c1ccncc1", "C1=CC=NC=C1"),
    ("CC(C)O", "OC(C)C"),
    ("CCCC[n+]1ccccc1", "[n+]1(CCCC)ccccc1"),
    ("CCn1cc[n+](C)c1", "C[n+]1ccn(CC)c1"),
    ("[B-](F)(F)(F)F", "F[B-](F)(F)F"),
    (
        "FC(F)(F)S(=O)(=O)[N-]S(=O)(=O)C(F)(F)F",
        "[N-](S(=O)(=O)C(F)(F)F)S(=O)(=O)C(F)(F)F",
    ),
    ("C1CCOC1", "O1CCCC1"),
];

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn criterion_3() -> Outcome {
    let model = GnnModel::new(GnnConfig::default(), 17).unwrap();
    let g = |s: &str| featurize_smiles(s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let systems = [
        ("CCCCn1cc[n+](C)c1", "F[P-](F)(F)(F)(F)F", "Cc1ccccc1"),
        ("CCCC[N+]1(C)CCCC1", "FC(F)(F)S(=O)(=O)[N-]S(=O)(=O)C(F)(F)F", "CCCCO"),
        ("CCCC[P+](CCCC)(CCCC)CCCC", "[Cl-]", "O"),
    ];
    let mut relabelings = 0;
    for (c, a, s) in systems {
        let (gc, ga, gs) = (g(c), g(a), g(s));
        let base = model.forward(&gc, &ga, &gs, 0.37).unwrap();
        for _ in 0..5 {
            let pc = gc.permute_nodes(&random_perm(gc.num_nodes, &mut rng));
            let pa = ga.permute_nodes(&random_perm(ga.num_nodes, &mut rng));
            let ps = gs.permute_nodes(&random_perm(gs.num_nodes, &mut rng));
            let y = model.forward(&pc, &pa, &ps, 0.37).unwrap();
            check(y.to_bits() == base.to_bits(), format!("relabeling changed {c}/{a}/{s}: {base} vs {y}"))?;
            relabelings += 1;
        }
        let swapped = model.forward(&ga, &gc, &gs, 0.37).unwrap();
        check(swapped.to_bits() == base.to_bits(), format!("ion swap changed {c}/{a}"))?;
    }
    let (c0, a0, s0) = (g("CCn1cc[n+](C)c1"), g("[B-](F)(F)(F)F"), g("CCO"));
    for (x, y) in EQUIVALENT_PAIRS {
        let (gx, gy) = (g(x), g(y));
        let charged = gx.node_features.as_slice().chunks(22).any(|r| r[11] == 1.0 || r[13] == 1.0);
        let (px, py) = if charged {
            // rewrite the ion it belongs to
            if gx.node_features.as_slice().chunks(22).any(|r| r[13] == 1.0) {
                (model.forward(&gx, &a0, &s0, 0.5), model.forward(&gy, &a0, &s0, 0.5))
            } else {
                (model.forward(&c0, &gx, &s0, 0.5), model.forward(&c0, &gy, &s0, 0.5))
            }
        } else {
            (model.forward(&c0, &a0, &gx, 0.5), model.forward(&c0, &a0, &gy, 0.5))
        };
        let (px, py) = (px.unwrap(), py.unwrap());
        check(px.to_bits() == py.to_bits(), format!("'{x}' vs '{y}': {px} != {py}"))?;
    }
    Ok(format!(
        "{relabelings} random relabelings, 3 ion swaps and {} equivalent-SMILES pairs: bit-identical outputs",
        EQUIVALENT_PAIRS.len()
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let data = Dataset::from_records(synthetic::generate(64, 404), "synthetic").map_err(|e| e.to_string())?;
    let idx: Vec<usize> = (0..64).collect();
    let mut model = GnnModel::new(GnnConfig::default(), 4).unwrap();
    let config = TrainConfig {
        max_steps: Some(2000),
        max_epochs: 2000,
        early_stop_patience: 2000,
        seed: 4,
        ..TrainConfig::default()
    };
    let history = train(&mut model, &data, &idx, &idx, &config).map_err(|e| e.to_string())?;
    let (mse, mae) = evaluate_loss(&model, &data, &idx).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let summary = format!(
        "train MAE {mae:.5} after {} Adam steps (best epoch {}), {secs:.0} s",
        history.steps, history.best_epoch
    );
    check(history.steps <= 2000, format!("{summary}: step cap exceeded"))?;
    check(mse.to_bits() == history.best_val_loss.to_bits(), format!("{summary}: best state not restored"))?;
    check(
        history.epochs.iter().all(|e| mse <= e.val_loss),
        format!("{summary}: restored loss above a recorded epoch"),
    )?;
    check(history.epochs.windows(2).all(|w| w[1].lr <= w[0].lr), "learning rate increased")?;
    check(mae < 0.01, summary.clone())?;
    check(secs < 300.0, format!("too slow: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let exact = |k: i32| 0.001 * 0.8f64.powi(k);
    // improving losses: no reduction
    let mut s = PlateauScheduler::new(0.001, 0.8, 3);
    for i in 0..50 {
        check(s.step(10.0 - i as f64) == 0.001, "rate changed while improving")?;
    }
    // a flat curve reduces every 3 epochs; the counter resets after each cut
    let mut s = PlateauScheduler::new(0.001, 0.8, 3);
    s.step(1.0);
    for epoch in 1..=30 {
        let lr = s.step(1.0);
        let k = (epoch / 3) as i32;
        check(lr.to_bits() == exact(k).to_bits(), format!("flat epoch {epoch}: {lr} != 0.001*0.8^{k}"))?;
    }
    // improvement resets the counter: two bad, one better, three bad -> one cut
    let mut s = PlateauScheduler::new(0.001, 0.8, 3);
    let mut lr = 0.0;
    for v in [1.0, 1.1, 1.2, 0.9, 0.95, 0.97, 0.99] {
        lr = s.step(v);
    }
    check(lr.to_bits() == exact(1).to_bits(), format!("reset scenario gave {lr}"))?;
    // two plateaus
    let mut s = PlateauScheduler::new(0.001, 0.8, 3);
    for v in [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0] {
        lr = s.step(v);
    }
    check(lr.to_bits() == exact(2).to_bits() && s.reductions() == 2, "two plateaus")?;

    // early stopping: monotone worsening from epoch 1 stops at 26
    let mut e = EarlyStopping::new(25);
    let stop = (1..=300).find(|&ep| e.step(ep as f64)).unwrap_or(0);
    check(stop == 26, format!("stopped at {stop}, expected 26"))?;
    // improvement at epoch 10 pushes the stop to 35
    let mut e = EarlyStopping::new(25);
    let curve = |ep: usize| if ep == 10 { 0.0 } else { ep as f64 };
    let stop = (1..=300).find(|&ep| e.step(curve(ep))).unwrap_or(0);
    check(stop == 35, format!("stopped at {stop}, expected 35"))?;
    Ok("lr = 0.001*0.8^k bit-exact over 30 plateau epochs; early stop at epochs 26 and 35 as contracted".into())
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let records = synthetic::generate(500, 606);
    let molecules: BTreeSet<&str> = records.iter().flat_map(|r| r.molecules()).collect();
    check(molecules.len() == 40, format!("synthetic corpus has {} molecules", molecules.len()))?;
    let mut val_sizes = BTreeSet::new();
    for seed in 0..20u64 {
        // prediction protocol
        let test = sample_prediction_test(&records, 0.1, seed);
        let s = split_prediction(&records, &test, seed, 0.1).map_err(|e| e.to_string())?;
        s.check_partition().map_err(|e| format!("prediction seed {seed}: {e}"))?;
        let test_combos: BTreeSet<_> = s.test.iter().map(|&i| records[i].combination()).collect();
        let overlap = s.train.iter().chain(&s.val).any(|&i| test_combos.contains(&records[i].combination()));
        check(!overlap, format!("prediction seed {seed}: combination overlap"))?;
        check(s.val.len() == (s.train.len() + s.val.len()) / 10, format!("prediction seed {seed}: val size"))?;

        // generalization protocol
        let spec = SplitSpec {
            mode: SplitMode::Generalization,
            seed,
            ..SplitSpec::default()
        };
        let g = split_generalization(&records, &spec).map_err(|e| e.to_string())?;
        g.check_partition().map_err(|e| format!("generalization seed {seed}: {e}"))?;
        let mols = |idx: &[usize]| -> BTreeSet<&str> { idx.iter().flat_map(|&i| records[i].molecules()).collect() };
        let train_mols = mols(&g.train);
        let trainval_mols: BTreeSet<&str> = train_mols.union(&mols(&g.val)).copied().collect();
        check(!g.test.is_empty(), format!("generalization seed {seed}: empty test"))?;
        for &i in &g.test {
            check(
                records[i].molecules().iter().any(|m| !trainval_mols.contains(m)),
                format!("generalization seed {seed}: test record {i} has no unseen molecule"),
            )?;
        }
        for &i in &g.val {
            check(
                records[i].molecules().iter().any(|m| !train_mols.contains(m)),
                format!("generalization seed {seed}: val record {i} has no molecule outside train"),
            )?;
        }
        let again = split_generalization(&records, &spec).unwrap();
        check(again.to_json() == g.to_json(), format!("generalization seed {seed}: not reproducible"))?;
        val_sizes.insert(g.val.len());
    }
    check(val_sizes.len() > 1, "validation size never varied across seeds")?;
    Ok(format!(
        "20 seeds x 2 modes: partitions, no test combination/molecule leakage, reproducible; {} distinct validation sizes",
        val_sizes.len()
    ))
}

// ---------------------------------------------------------------- 7

fn reference_metrics(p: &[f64], t: &[f64]) -> (f64, f64, f64, f64) {
    let n = p.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut mean_t = 0.0;
    let mut ape = 0.0;
    for i in 0..p.len() {
        abs += (p[i] - t[i]).abs();
        sq += (p[i] - t[i]).powi(2);
        mean_t += t[i];
        ape += ((p[i].exp() - t[i].exp()) / t[i].exp()).abs();
    }
    mean_t /= n;
    let mut tot = 0.0;
    for v in t {
        tot += (v - mean_t).powi(2);
    }
    (abs / n, (sq / n).sqrt(), 1.0 - sq / tot, 100.0 * ape / n)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 500;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.gen_range(2..200);
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..5.0)).collect();
        let p: Vec<f64> = t.iter().map(|v| v + rng.gen_range(-1.0..1.0) * rng.gen::<f64>()).collect();
        let m = space_metrics(&p, &t).map_err(|e| e.to_string())?;
        let mp = mape(&p, &t).map_err(|e| e.to_string())?;
        let (mae, rmse, r2, mp_ref) = reference_metrics(&p, &t);
        for (a, b) in [(m.mae, mae), (m.rmse, rmse), (m.r2, r2), (mp, mp_ref)] {
            worst = worst.max((a - b).abs());
        }
        check(m.mae <= m.rmse, format!("MAE {} > RMSE {}", m.mae, m.rmse))?;
    }
    check(worst <= 1e-12, format!("max deviation from reference {worst:.2e}"))?;
    Ok(format!("{trials} random vector pairs: max deviation {worst:.1e}, MAE <= RMSE throughout"))
}

// ---------------------------------------------------------------- synthetic fallback

fn synthetic_benchmark() -> Outcome {
    let started = Instant::now();
    let data = Dataset::from_records(synthetic::generate(600, 808), "synthetic").map_err(|e| e.to_string())?;
    let spec = SplitSpec {
        seed: 8,
        ..SplitSpec::default()
    };
    let s = split(&data.records, &spec, None).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        max_epochs: 200,
        batch_size: 32,
        seed: 8,
        ..TrainConfig::default()
    };
    let (artifact, history) =
        train_model(&data, &s.train, &s.val, &ModelChoice::Gnn(GnnConfig::default()), &config).map_err(|e| e.to_string())?;
    let test = data.select(&s.test);
    let pred = predict_records(&artifact.model, &data.graphs, &test).map_err(|e| e.to_string())?;
    let targets: Vec<f64> = test.iter().map(|r| r.ln_gamma).collect();
    let m = space_metrics(&pred, &targets).map_err(|e| e.to_string())?;
    let summary = format!(
        "smooth ln gamma(T, size) on unseen combinations: test MAE {:.4}, R2 {:.4} ({} test records, {} epochs, {:.0} s)",
        m.mae,
        m.r2,
        test.len(),
        history.epochs.len(),
        started.elapsed().as_secs_f64()
    );
    check(m.mae < 0.05, summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------- 8-11

struct Published {
    data: Dataset,
    test: Vec<usize>,
}

fn published() -> Option<Published> {
    let data_path = std::env::var_os("ILGAMMA_DATASET")?;
    let test_path = std::env::var_os("ILGAMMA_TEST_MANIFEST")?;
    let data = Dataset::load(&PathBuf::from(data_path)).expect("published dataset loads");
    let test = load_test_membership(&PathBuf::from(test_path)).expect("test membership loads");
    Some(Published { data, test })
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn test_metrics(data: &Dataset, pred: &[f64], test: &[usize]) -> Result<MetricReport, String> {
    MetricReport::compute(pred, &data.select(test)).map_err(|e| e.to_string())
}

fn criterion_8(p: &Published) -> Outcome {
    let s = split_prediction(&p.data.records, &p.test, 0, 0.1).map_err(|e| e.to_string())?;
    let (art, _) = train_model(&p.data, &s.train, &s.val, &ModelChoice::Gnn(GnnConfig::default()), &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let pred = predict_records(&art.model, &p.data.graphs, &p.data.select(&s.test)).map_err(|e| e.to_string())?;
    let r = test_metrics(&p.data, &pred, &s.test)?;
    let summary = format!("single GNN test MAE {:.4} on {} records", r.ln_gamma.mae, r.count);
    check((0.073..=0.113).contains(&r.ln_gamma.mae), summary.clone())?;
    Ok(summary)
}

fn ensemble_of_ten(p: &Published, mode: SplitMode) -> Result<MetricReport, String> {
    let spec = SplitSpec {
        mode,
        ..SplitSpec::default()
    };
    let base = match mode {
        SplitMode::Prediction => split_prediction(&p.data.records, &p.test, 0, 0.1),
        SplitMode::Generalization => split_generalization(&p.data.records, &spec),
    }
    .map_err(|e| e.to_string())?;
    let config = EnsembleConfig {
        size: 10,
        split: spec,
        ..EnsembleConfig::default()
    };
    let (ens, _) = train_ensemble(&p.data, &base, &config, threads()).map_err(|e| e.to_string())?;
    let preds = ens.predict(&p.data.graphs, &p.data.select(&base.test)).map_err(|e| e.to_string())?;
    let mean: Vec<f64> = preds.iter().map(|x| x.mean).collect();
    test_metrics(&p.data, &mean, &base.test)
}

fn criterion_9(p: &Published) -> Outcome {
    let r = ensemble_of_ten(p, SplitMode::Prediction)?;
    let coverage = r.within_band as f64 / r.count as f64;
    let summary = format!(
        "10-ensemble test MAE {:.4}, within +/-0.5: {}/{} ({:.1} %)",
        r.ln_gamma.mae,
        r.within_band,
        r.count,
        100.0 * coverage
    );
    check(r.ln_gamma.mae <= 0.085 && coverage >= 0.97, summary.clone())?;
    Ok(summary)
}

fn criterion_10(p: &Published) -> Outcome {
    let r = ensemble_of_ten(p, SplitMode::Generalization)?;
    let summary = format!("generalization 10-ensemble test MAE {:.4}, R2 {:.4}", r.ln_gamma.mae, r.ln_gamma.r2);
    check(r.ln_gamma.mae <= 0.21 && r.ln_gamma.r2 >= 0.95, summary.clone())?;
    Ok(summary)
}

fn criterion_11(p: &Published) -> Outcome {
    let s = split_prediction(&p.data.records, &p.test, 0, 0.1).map_err(|e| e.to_string())?;
    let (art, _) = train_model(&p.data, &s.train, &s.val, &ModelChoice::Mcm(McmConfig::default()), &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let val: Vec<&DataRecord> = p.data.select(&s.val);
    let pred = predict_records(&art.model, &p.data.graphs, &val).map_err(|e| e.to_string())?;
    let targets: Vec<f64> = val.iter().map(|r| r.ln_gamma).collect();
    let m = space_metrics(&pred, &targets).map_err(|e| e.to_string())?;
    let summary = format!("MCM validation RMSE {:.4}", m.rmse);
    check((0.085..=0.150).contains(&m.rmse), summary.clone())?;
    Ok(summary)
}

// ----------------------------------------------------------------

fn report(label: &str, outcome: &Outcome) {
    match outcome {
        Ok(detail) => println!("PASS  {label}: {detail}"),
        Err(detail) => println!("FAIL  {label}: {detail}"),
    }
}

fn main() {
    let always: [(&str, fn() -> Outcome); 7] = [
        ("1 gradient fidelity", criterion_1),
        ("2 featurization exactness", criterion_2),
        ("3 symmetry invariants", criterion_3),
        ("4 optimization capability", criterion_4),
        ("5 schedule arithmetic", criterion_5),
        ("6 split contracts", criterion_6),
        ("7 metric oracle", criterion_7),
    ];
    let mut failed = Vec::new();
    for (label, run) in always {
        let outcome = run();
        report(label, &outcome);
        if outcome.is_err() {
            failed.push(label);
        }
    }

    let dataset_criteria: [(&str, fn(&Published) -> Outcome); 4] = [
        ("8 single GNN, prediction split", criterion_8),
        ("9 10-ensemble, prediction split", criterion_9),
        ("10 10-ensemble, generalization split", criterion_10),
        ("11 MCM validation RMSE", criterion_11),
    ];
    match published() {
        Some(p) => {
            for (label, run) in dataset_criteria {
                let outcome = run(&p);
                report(label, &outcome);
                if outcome.is_err() {
                    failed.push(label);
                }
            }
        }
        None => {
            for (label, _) in dataset_criteria {
                println!("N/A   {label}: NOT REPRODUCIBLE (published dataset not provided; set ILGAMMA_DATASET and ILGAMMA_TEST_MANIFEST)");
            }
            let outcome = synthetic_benchmark();
            report("synthetic sanity benchmark", &outcome);
            if outcome.is_err() {
                failed.push("synthetic sanity benchmark");
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all runnable criteria passed");
    } else {
        println!("acceptance: failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
