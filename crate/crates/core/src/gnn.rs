//! Dual-channel graph neural network for ln γ∞.
//!
//! One message-passing channel reads the solute graph, a second channel with
//! its own weights reads both ions of the IL. Each channel embeds node and
//! edge features linearly, runs `num_layers` GINE+GRU updates and sum-pools
//! node states into a fingerprint; the IL fingerprint pools the nodes of both
//! ions. Fingerprints go through per-channel MLPs, are concatenated (IL first)
//! into the interaction MLP, and the result plus the normalized temperature
//! feeds the regression head.
//!
//! Within a batch every distinct molecule is featurized and passed through
//! its channel once; records then gather their fingerprints. Because each
//! node row is computed independently and every sum is correctly rounded,
//! outputs are bit-identical under atom relabeling and batch composition.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TemperatureScale;
use crate::error::{ModelError, ShapeError};
use crate::featurize::{AttributedGraph, EDGE_FEATURES, FEATURIZER_VERSION, NODE_FEATURES};
use crate::model::{Regressor, Sample};
use crate::tensor::{glorot_uniform, GruCell, Matrix, Mlp, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnConfig {
    /// Width of node states and fingerprints.
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Hidden widths of the GINE update MLP; the output is always `hidden_dim`.
    pub gine_hidden: Vec<usize>,
    pub channel_mlp_widths: Vec<usize>,
    pub interaction_widths: Vec<usize>,
    /// Head layer widths including its input (last interaction width + 1 for
    /// the temperature) and the scalar output.
    pub head_widths: Vec<usize>,
    /// Negative-side slope of the leaky activation.
    pub slope: f64,
    pub dropout: f64,
    /// Reuse one GINE/GRU parameter set for every layer.
    pub share_layer_weights: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            hidden_dim: 64,
            num_layers: 2,
            gine_hidden: vec![64],
            channel_mlp_widths: vec![256, 256, 128],
            interaction_widths: vec![256, 256, 256],
            head_widths: vec![257, 128, 1],
            slope: 0.01,
            dropout: 0.0,
            share_layer_weights: false,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.hidden_dim == 0 || self.num_layers == 0 {
            return fail("hidden_dim and num_layers must be positive".into());
        }
        if self.channel_mlp_widths.is_empty() || self.interaction_widths.is_empty() {
            return fail("channel and interaction MLPs need at least one layer".into());
        }
        let inter_out = *self.interaction_widths.last().expect("non-empty");
        if self.head_widths.len() < 2 || self.head_widths[0] != inter_out + 1 {
            return fail(format!(
                "head_widths must start with {} (interaction width + temperature)",
                inter_out + 1
            ));
        }
        if *self.head_widths.last().expect("non-empty") != 1 {
            return fail("head_widths must end with 1".into());
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return fail("slope must lie in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Parameters of one GINE+GRU update.
#[derive(Debug, Clone, PartialEq)]
pub struct GineGruLayer {
    pub eps: ParamId,
    pub mlp: Mlp,
    pub gru: GruCell,
}

/// One message-passing channel: embeddings plus the stacked layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// θ_V, `22 × hidden`, no bias.
    pub embed_node: ParamId,
    /// θ_E, `6 × hidden`, no bias.
    pub embed_edge: ParamId,
    pub layers: Vec<GineGruLayer>,
}

impl Channel {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, cfg: &GnnConfig, rng: &mut R) -> Self {
        let d = cfg.hidden_dim;
        let embed_node = store.add(format!("{name}.embed_node"), glorot_uniform(NODE_FEATURES, d, rng));
        let embed_edge = store.add(format!("{name}.embed_edge"), glorot_uniform(EDGE_FEATURES, d, rng));
        let distinct = if cfg.share_layer_weights { 1 } else { cfg.num_layers };
        let mut owned = Vec::with_capacity(distinct);
        for l in 0..distinct {
            let prefix = format!("{name}.layer{l}");
            let eps = store.add(format!("{prefix}.eps"), Matrix::zeros(1, 1));
            let mut widths = cfg.gine_hidden.clone();
            widths.push(d);
            let mlp = Mlp::new(store, &format!("{prefix}.gine"), d, &widths, cfg.slope, 0.0, false, rng);
            let gru = GruCell::new(store, &format!("{prefix}.gru"), d, d, rng);
            owned.push(GineGruLayer { eps, mlp, gru });
        }
        let layers = (0..cfg.num_layers).map(|l| owned[l.min(distinct - 1)].clone()).collect();
        Channel {
            embed_node,
            embed_edge,
            layers,
        }
    }
}

/// Disjoint union of molecule graphs, ready for message passing.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub node_features: Matrix,
    pub edge_features: Matrix,
    pub edge_source: Arc<[usize]>,
    pub edge_target: Arc<[usize]>,
    /// Molecule index of every node.
    pub node_graph: Arc<[usize]>,
    pub num_graphs: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&AttributedGraph]) -> Self {
        let nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
        let edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
        let mut node_features = Vec::with_capacity(nodes * NODE_FEATURES);
        let mut edge_features = Vec::with_capacity(edges * EDGE_FEATURES);
        let mut src = Vec::with_capacity(edges);
        let mut dst = Vec::with_capacity(edges);
        let mut node_graph = Vec::with_capacity(nodes);
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            node_features.extend_from_slice(g.node_features.as_slice());
            edge_features.extend_from_slice(g.edge_features.as_slice());
            for &(s, t) in &g.edge_index {
                src.push(s + offset);
                dst.push(t + offset);
            }
            node_graph.extend(std::iter::repeat(gi).take(g.num_nodes));
            offset += g.num_nodes;
        }
        GraphBatch {
            node_features: Matrix::from_vec(nodes, NODE_FEATURES, node_features),
            edge_features: Matrix::from_vec(edges, EDGE_FEATURES, edge_features),
            edge_source: src.into(),
            edge_target: dst.into(),
            node_graph: node_graph.into(),
            num_graphs: graphs.len(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Il,
    Solute,
}

#[derive(Debug, Clone)]
pub struct GnnModel {
    pub config: GnnConfig,
    pub store: ParamStore,
    pub il: Channel,
    pub solute: Channel,
    pub il_mlp: Mlp,
    pub solute_mlp: Mlp,
    pub interaction: Mlp,
    pub head: Mlp,
    pub scale: Option<TemperatureScale>,
    pub featurizer_version: String,
}

impl GnnModel {
    pub fn new(config: GnnConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let il = Channel::new(&mut store, "gnn.il", &config, &mut rng);
        let solute = Channel::new(&mut store, "gnn.solute", &config, &mut rng);
        let d = config.hidden_dim;
        let (slope, drop) = (config.slope, config.dropout);
        let il_mlp = Mlp::new(&mut store, "gnn.il_mlp", d, &config.channel_mlp_widths, slope, drop, true, &mut rng);
        let solute_mlp =
            Mlp::new(&mut store, "gnn.solute_mlp", d, &config.channel_mlp_widths, slope, drop, true, &mut rng);
        let joined = 2 * il_mlp.out_dim();
        let interaction = Mlp::new(
            &mut store,
            "gnn.interaction",
            joined,
            &config.interaction_widths,
            slope,
            drop,
            true,
            &mut rng,
        );
        let head = Mlp::new(
            &mut store,
            "gnn.head",
            config.head_widths[0],
            &config.head_widths[1..],
            slope,
            drop,
            false,
            &mut rng,
        );
        Ok(GnnModel {
            config,
            store,
            il,
            solute,
            il_mlp,
            solute_mlp,
            interaction,
            head,
            scale: None,
            featurizer_version: FEATURIZER_VERSION.to_string(),
        })
    }

    pub fn channel(&self, kind: ChannelKind) -> &Channel {
        match kind {
            ChannelKind::Il => &self.il,
            ChannelKind::Solute => &self.solute,
        }
    }

    /// h⁰ = F_V θ_V and f_e = F_E θ_E.
    pub fn embed(&self, tape: &mut Tape, channel: &Channel, batch: &GraphBatch) -> Result<(Var, Var), ShapeError> {
        let theta_v = tape.param(&self.store, channel.embed_node);
        let theta_e = tape.param(&self.store, channel.embed_edge);
        let x = tape.input(batch.node_features.clone());
        let e = tape.input(batch.edge_features.clone());
        Ok((tape.matmul(x, theta_v)?, tape.matmul(e, theta_e)?))
    }

    /// h'_v = GRU(h_v, σ(MLP((1 + ε) h_v + Σ_{w ∈ N(v)} σ(h_w + f_e_vw)))).
    pub fn gine_gru_layer(
        &self,
        tape: &mut Tape,
        layer: &GineGruLayer,
        batch: &GraphBatch,
        h: Var,
        edge_embed: Var,
    ) -> Result<Var, ShapeError> {
        let slope = self.config.slope;
        let neighbours = tape.gather_rows(h, batch.edge_source.clone())?;
        let msg = tape.add(neighbours, edge_embed)?;
        let msg = tape.leaky_relu(msg, slope);
        let aggregated = tape.segment_sum(msg, batch.edge_target.clone(), batch.num_nodes())?;
        let eps = tape.param(&self.store, layer.eps);
        let eps_h = tape.scale_by(h, eps)?;
        let self_term = tape.add(h, eps_h)?;
        let pre = tape.add(self_term, aggregated)?;
        let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
        let update = layer.mlp.forward(tape, &self.store, pre, false, &mut no_rng)?;
        let update = tape.leaky_relu(update, slope);
        layer.gru.forward(tape, &self.store, h, update)
    }

    /// Sum-pooled final node states, one row per molecule in `batch`.
    pub fn fingerprints(&self, tape: &mut Tape, kind: ChannelKind, batch: &GraphBatch) -> Result<Var, ShapeError> {
        let channel = self.channel(kind);
        let (mut h, edge_embed) = self.embed(tape, channel, batch)?;
        for layer in &channel.layers {
            h = self.gine_gru_layer(tape, layer, batch, h, edge_embed)?;
        }
        tape.segment_sum(h, batch.node_graph.clone(), batch.num_graphs)
    }

    /// Fingerprint of one molecule through the given channel.
    pub fn molecule_fingerprint(&self, graph: &AttributedGraph, kind: ChannelKind) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let fp = self.fingerprints(&mut tape, kind, &GraphBatch::new(&[graph]))?;
        Ok(tape.value(fp).row(0).to_vec())
    }

    /// IL fingerprint: IL-channel states of both ions pooled together.
    pub fn il_fingerprint(&self, cation: &AttributedGraph, anion: &AttributedGraph) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let fp = self.il_fingerprints(&mut tape, &GraphBatch::new(&[cation, anion]), &[(0, 1)])?;
        Ok(tape.value(fp).row(0).to_vec())
    }

    fn il_fingerprints(&self, tape: &mut Tape, batch: &GraphBatch, pairs: &[(usize, usize)]) -> Result<Var, ShapeError> {
        let per_ion = self.fingerprints(tape, ChannelKind::Il, batch)?;
        let cations: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let anions: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let c = tape.gather_rows(per_ion, cations)?;
        let a = tape.gather_rows(per_ion, anions)?;
        tape.add(c, a)
    }

    /// Channel MLPs on both fingerprints, concatenation (IL first), then the
    /// interaction layers.
    pub fn interaction(
        &self,
        tape: &mut Tape,
        il_fp: Var,
        solute_fp: Var,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ShapeError> {
        let il = self.il_mlp.forward(tape, &self.store, il_fp, training, rng)?;
        let sol = self.solute_mlp.forward(tape, &self.store, solute_fp, training, rng)?;
        let joined = tape.concat_cols(&[il, sol])?;
        self.interaction.forward(tape, &self.store, joined, training, rng)
    }

    /// Head MLP on `[h_IL-S, T_norm]`.
    pub fn predict_ln_gamma(
        &self,
        tape: &mut Tape,
        joint: Var,
        t_norm: &[f64],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ShapeError> {
        let t = tape.input(Matrix::from_vec(t_norm.len(), 1, t_norm.to_vec()));
        let x = tape.concat_cols(&[joint, t])?;
        self.head.forward(tape, &self.store, x, training, rng)
    }

    /// Single-sample inference from graphs and an already normalized temperature.
    pub fn forward(
        &self,
        cation: &AttributedGraph,
        anion: &AttributedGraph,
        solute: &AttributedGraph,
        t_norm: f64,
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = self.forward_graphs(&mut tape, &[(cation, anion, solute)], &[t_norm], false, &mut rng)?;
        Ok(tape.value(out).item())
    }

    fn forward_graphs(
        &self,
        tape: &mut Tape,
        systems: &[(&AttributedGraph, &AttributedGraph, &AttributedGraph)],
        t_norm: &[f64],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ShapeError> {
        let mut ions = Interner::default();
        let mut solutes = Interner::default();
        let mut pairs = Vec::with_capacity(systems.len());
        let mut solute_rows = Vec::with_capacity(systems.len());
        for (c, a, s) in systems {
            pairs.push((ions.intern(c), ions.intern(a)));
            solute_rows.push(solutes.intern(s));
        }
        let il_fp = self.il_fingerprints(tape, &GraphBatch::new(&ions.graphs), &pairs)?;
        let per_solute = self.fingerprints(tape, ChannelKind::Solute, &GraphBatch::new(&solutes.graphs))?;
        let sol_fp = tape.gather_rows(per_solute, solute_rows)?;
        let joint = self.interaction(tape, il_fp, sol_fp, training, rng)?;
        self.predict_ln_gamma(tape, joint, t_norm, training, rng)
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }
}

/// Deduplicates graphs by address.
#[derive(Default)]
struct Interner<'a> {
    graphs: Vec<&'a AttributedGraph>,
    index: HashMap<*const AttributedGraph, usize>,
}

impl<'a> Interner<'a> {
    fn intern(&mut self, g: &'a AttributedGraph) -> usize {
        *self.index.entry(g as *const _).or_insert_with(|| {
            self.graphs.push(g);
            self.graphs.len() - 1
        })
    }
}

impl Regressor for GnnModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward_batch(
        &self,
        tape: &mut Tape,
        batch: &[Sample<'_>],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError> {
        let systems: Vec<_> = batch.iter().map(|s| (s.cation, s.anion, s.solute)).collect();
        let t: Vec<f64> = batch.iter().map(|s| s.t_norm).collect();
        Ok(self.forward_graphs(tape, &systems, &t, training, rng)?)
    }

    fn temperature_scale(&self) -> Option<TemperatureScale> {
        self.scale
    }

    fn set_temperature_scale(&mut self, scale: TemperatureScale) {
        self.scale = Some(scale);
    }

    fn set_dropout(&mut self, rate: f64) {
        self.config.dropout = rate;
        for mlp in [&mut self.il_mlp, &mut self.solute_mlp, &mut self.interaction, &mut self.head] {
            mlp.dropout = rate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::featurize_smiles;

    fn g(s: &str) -> AttributedGraph {
        featurize_smiles(s).unwrap()
    }

    /// Parameter count by walking the layer shapes implied by a config.
    fn shape_oracle(cfg: &GnnConfig) -> usize {
        let d = cfg.hidden_dim;
        let dense = |i: usize, o: usize| i * o + o;
        let mut gine = 0;
        let mut prev = d;
        for &w in cfg.gine_hidden.iter().chain(std::iter::once(&d)) {
            gine += dense(prev, w);
            prev = w;
        }
        let gru = 2 * d * 3 * d + 3 * d + d;
        let layers = if cfg.share_layer_weights { 1 } else { cfg.num_layers };
        let channel = NODE_FEATURES * d + EDGE_FEATURES * d + layers * (1 + gine + gru);
        let mut chan_mlp = 0;
        let mut prev = d;
        for &w in &cfg.channel_mlp_widths {
            chan_mlp += dense(prev, w);
            prev = w;
        }
        let mut inter = 0;
        let mut prev_i = 2 * prev;
        for &w in &cfg.interaction_widths {
            inter += dense(prev_i, w);
            prev_i = w;
        }
        let head: usize = cfg.head_widths.windows(2).map(|p| dense(p[0], p[1])).sum();
        2 * channel + 2 * chan_mlp + inter + head
    }

    #[test]
    fn default_parameter_count_is_golden() {
        let cfg = GnnConfig::default();
        let model = GnnModel::new(cfg.clone(), 0).unwrap();
        assert_eq!(shape_oracle(&cfg), 597_381);
        assert_eq!(model.num_parameters(), 597_381);
    }

    #[test]
    fn parameter_count_follows_config() {
        let cfg = GnnConfig {
            hidden_dim: 16,
            num_layers: 3,
            gine_hidden: vec![8, 12],
            channel_mlp_widths: vec![32, 16],
            interaction_widths: vec![24],
            head_widths: vec![25, 10, 1],
            share_layer_weights: true,
            ..GnnConfig::default()
        };
        let model = GnnModel::new(cfg.clone(), 3).unwrap();
        assert_eq!(model.num_parameters(), shape_oracle(&cfg));
    }

    #[test]
    fn config_validation() {
        let bad = GnnConfig {
            head_widths: vec![128, 1],
            ..GnnConfig::default()
        };
        assert!(GnnModel::new(bad, 0).is_err());
        let bad = GnnConfig {
            head_widths: vec![257, 128, 2],
            ..GnnConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_node_embedding_gives_zero_states() {
        let mut model = GnnModel::new(GnnConfig::default(), 1).unwrap();
        let id = model.il.embed_node;
        *model.store.value_mut(id) = Matrix::zeros(NODE_FEATURES, 64);
        let mut tape = Tape::new();
        let batch = GraphBatch::new(&[&g("CCO")]);
        let (h, e) = model.embed(&mut tape, &model.il, &batch).unwrap();
        assert!(tape.value(h).as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(tape.shape(h), (3, 64));
        assert_eq!(tape.shape(e), (4, 64));
    }

    #[test]
    fn embedding_sums_hot_columns() {
        let model = GnnModel::new(GnnConfig::default(), 2).unwrap();
        let graph = g("CCO");
        let mut tape = Tape::new();
        let (h, _) = model.embed(&mut tape, &model.il, &GraphBatch::new(&[&graph])).unwrap();
        let theta = model.store.value(model.il.embed_node);
        // oxygen: type O (1), charge 0 (12), sp3 (16), one H (19)
        for c in 0..64 {
            let expected = theta.get(1, c) + theta.get(12, c) + theta.get(16, c) + theta.get(19, c);
            assert!((tape.value(h).get(2, c) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_update() {
        let model = GnnModel::new(GnnConfig::default(), 4).unwrap();
        let graph = g("O");
        let batch = GraphBatch::new(&[&graph]);
        let mut tape = Tape::new();
        let (h, e) = model.embed(&mut tape, &model.il, &batch).unwrap();
        let layer = &model.il.layers[0];
        let out = model.gine_gru_layer(&mut tape, layer, &batch, h, e).unwrap();

        // same update with the neighbourhood sum left out entirely
        let mut t2 = Tape::new();
        let (h2, _) = model.embed(&mut t2, &model.il, &batch).unwrap();
        let eps = t2.param(&model.store, layer.eps);
        let eh = t2.scale_by(h2, eps).unwrap();
        let pre = t2.add(h2, eh).unwrap();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let a = layer.mlp.forward(&mut t2, &model.store, pre, false, &mut rng).unwrap();
        let a = t2.leaky_relu(a, 0.01);
        let expected = layer.gru.forward(&mut t2, &model.store, h2, a).unwrap();
        assert_eq!(tape.value(out), t2.value(expected));
    }

    #[test]
    fn two_node_layer_matches_hand_trace() {
        // identity embeddings and GINE MLP, GRU with zero weights and biases:
        // z = r = 1/2, n = 0, so h' = h / 2 and the GINE path drops out.
        let cfg = GnnConfig {
            hidden_dim: 2,
            gine_hidden: vec![2],
            ..GnnConfig::default()
        };
        let mut model = GnnModel::new(cfg, 0).unwrap();
        let layer = model.il.layers[0].clone();
        for lin in &layer.mlp.layers {
            *model.store.value_mut(lin.weight) = Matrix::identity(2);
        }
        for id in [layer.gru.w_input, layer.gru.w_hidden] {
            let (r, c) = model.store.value(id).shape();
            *model.store.value_mut(id) = Matrix::zeros(r, c);
        }
        let graph = g("CO");
        let batch = GraphBatch::new(&[&graph]);
        let mut tape = Tape::new();
        let h = tape.input(Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]));
        let e = tape.input(Matrix::from_rows(&[vec![0.5, 0.5], vec![-1.0, 1.0]]));
        let out = model.gine_gru_layer(&mut tape, &layer, &batch, h, e).unwrap();
        assert_eq!(tape.value(out), &Matrix::from_rows(&[vec![0.5, -1.0], vec![1.5, 0.25]]));

        // and the aggregation itself: m_0 = σ(h_1 + f_(1→0)), m_1 = σ(h_0 + f_(0→1))
        let neighbours = tape.gather_rows(h, batch.edge_source.clone()).unwrap();
        let msg = tape.add(neighbours, e).unwrap();
        let msg = tape.leaky_relu(msg, 0.01);
        let agg = tape.segment_sum(msg, batch.edge_target.clone(), 2).unwrap();
        let expected = Matrix::from_rows(&[vec![2.0, 1.5], vec![1.5, -0.015]]);
        assert!(tape.value(agg).max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn layer_is_permutation_equivariant() {
        let model = GnnModel::new(GnnConfig::default(), 5).unwrap();
        let graph = g("CCCC[n+]1ccc(C)cc1");
        let perm: Vec<usize> = (0..graph.num_nodes).rev().collect();
        let permuted = graph.permute_nodes(&perm);
        let run = |gr: &AttributedGraph| {
            let batch = GraphBatch::new(&[gr]);
            let mut tape = Tape::new();
            let (h, e) = model.embed(&mut tape, &model.il, &batch).unwrap();
            let out = model.gine_gru_layer(&mut tape, &model.il.layers[0], &batch, h, e).unwrap();
            tape.value(out).clone()
        };
        let a = run(&graph);
        let b = run(&permuted);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(a.row(i), b.row(p));
        }
    }

    #[test]
    fn fingerprint_properties() {
        let model = GnnModel::new(GnnConfig::default(), 6).unwrap();
        let water = g("O");
        let fp = model.molecule_fingerprint(&water, ChannelKind::Solute).unwrap();
        assert_eq!(fp.len(), 64);

        let tol = g("Cc1ccccc1");
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let a = model.molecule_fingerprint(&tol, ChannelKind::Solute).unwrap();
        let b = model.molecule_fingerprint(&tol.permute_nodes(&perm), ChannelKind::Solute).unwrap();
        assert_eq!(a, b);

        // a disconnected copy doubles the pooled vector
        let mut tape = Tape::new();
        let mut batch = GraphBatch::new(&[&tol, &tol]);
        batch.node_graph = vec![0; batch.num_nodes()].into();
        batch.num_graphs = 1;
        let fp2 = model.fingerprints(&mut tape, ChannelKind::Solute, &batch).unwrap();
        for (x, y) in tape.value(fp2).row(0).iter().zip(&a) {
            assert!((x - 2.0 * y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn il_fingerprint_is_sum_of_ion_fingerprints() {
        let model = GnnModel::new(GnnConfig::default(), 7).unwrap();
        let c = g("CCn1cc[n+](C)c1");
        let a = g("[B-](F)(F)(F)F");
        let ca = model.il_fingerprint(&c, &a).unwrap();
        let ac = model.il_fingerprint(&a, &c).unwrap();
        assert_eq!(ca, ac);
        let fc = model.molecule_fingerprint(&c, ChannelKind::Il).unwrap();
        let fa = model.molecule_fingerprint(&a, ChannelKind::Il).unwrap();
        let sum: Vec<f64> = fc.iter().zip(&fa).map(|(x, y)| x + y).collect();
        assert_eq!(ca, sum);
    }

    #[test]
    fn zero_weight_channel_gives_zero_fingerprint() {
        let mut model = GnnModel::new(GnnConfig::default(), 8).unwrap();
        let ids: Vec<ParamId> = model
            .store
            .ids()
            .filter(|&id| model.store.name(id).starts_with("gnn.il."))
            .collect();
        for id in ids {
            let (r, c) = model.store.value(id).shape();
            *model.store.value_mut(id) = Matrix::zeros(r, c);
        }
        let fp = model.il_fingerprint(&g("CCCC[n+]1ccccc1"), &g("[Cl-]")).unwrap();
        assert!(fp.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_fingerprints_leave_only_biases() {
        let mut model = GnnModel::new(GnnConfig::default(), 9).unwrap();
        let bias_ids: Vec<ParamId> = model
            .store
            .ids()
            .filter(|&id| {
                let n = model.store.name(id);
                (n.contains("_mlp.") || n.contains("interaction.")) && n.ends_with(".b")
            })
            .collect();
        for (k, id) in bias_ids.iter().enumerate() {
            let c = model.store.value(*id).cols();
            *model.store.value_mut(*id) = Matrix::filled(1, c, 0.01 * (k + 1) as f64);
        }
        let mut tape = Tape::new();
        let z = tape.input(Matrix::zeros(1, 64));
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = model.interaction(&mut tape, z, z, false, &mut rng).unwrap();
        assert_eq!(tape.shape(out), (1, 256));
        // recompute the bias-only path by hand
        let mut h_il = vec![0.0; 64];
        let mut h_s = vec![0.0; 64];
        for (mlp, h) in [(&model.il_mlp, &mut h_il), (&model.solute_mlp, &mut h_s)] {
            for layer in &mlp.layers {
                let w = model.store.value(layer.weight);
                let b = model.store.value(layer.bias.unwrap());
                let x = Matrix::from_vec(1, h.len(), h.clone()).matmul(w);
                *h = x
                    .as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(v, bb)| {
                        let y = v + bb;
                        if y > 0.0 { y } else { 0.01 * y }
                    })
                    .collect();
            }
        }
        let mut h: Vec<f64> = h_il.into_iter().chain(h_s).collect();
        for layer in &model.interaction.layers {
            let w = model.store.value(layer.weight);
            let b = model.store.value(layer.bias.unwrap());
            let x = Matrix::from_vec(1, h.len(), h.clone()).matmul(w);
            h = x
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(v, bb)| {
                    let y = v + bb;
                    if y > 0.0 { y } else { 0.01 * y }
                })
                .collect();
        }
        assert!(tape.value(out).max_abs_diff(&Matrix::from_vec(1, 256, h)) < 1e-12);
    }

    #[test]
    fn zero_head_predicts_its_bias() {
        let mut model = GnnModel::new(GnnConfig::default(), 10).unwrap();
        for layer in model.head.layers.clone() {
            let (r, c) = model.store.value(layer.weight).shape();
            *model.store.value_mut(layer.weight) = Matrix::zeros(r, c);
        }
        let last = model.head.layers.last().unwrap().bias.unwrap();
        *model.store.value_mut(last) = Matrix::scalar(-0.75);
        let y = model.forward(&g("CCn1cc[n+](C)c1"), &g("[Cl-]"), &g("CCO"), 0.3).unwrap();
        assert_eq!(y, -0.75);
        assert_eq!(model.head.layers[0].in_dim, 257);
    }

    #[test]
    fn forward_is_deterministic_and_ion_order_free() {
        let model = GnnModel::new(GnnConfig::default(), 11).unwrap();
        let (c, a, s) = (g("CCCCn1cc[n+](C)c1"), g("F[P-](F)(F)(F)(F)F"), g("c1ccccc1"));
        let y1 = model.forward(&c, &a, &s, 0.4).unwrap();
        let y2 = model.forward(&c, &a, &s, 0.4).unwrap();
        let y3 = model.forward(&a, &c, &s, 0.4).unwrap();
        assert_eq!(y1.to_bits(), y2.to_bits());
        assert_eq!(y1.to_bits(), y3.to_bits());
        assert!(y1.is_finite());
    }
}
