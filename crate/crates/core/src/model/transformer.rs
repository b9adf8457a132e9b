//! The next-action transformer.
//!
//! Each placed fragment is one token: its embedding plus a projection of
//! (dock saturation ‖ conditions). There are no positional embeddings. All
//! but the last layer are full self-attention with logits biased by
//! `−a · distance`; the last layer attends from the focal fragment only,
//! biased by the distance of every fragment to the focal attachment. The head
//! reads [focal hidden ‖ focal saturation ‖ attachment-type embedding ‖
//! conditions] and emits one logit per action plus CAUTERIZE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::params::{ParamStore, WeightsError};
use super::tape::{Tape, Var};
use super::tensor::Matrix;
use crate::molgraph::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub frag_dim: usize,
    pub attach_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub geometry_init: f64,
    pub freeze_geometry: bool,
    /// When false the distance bias is left out of the graph entirely.
    pub geometry: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            frag_dim: 256,
            attach_dim: 64,
            heads: 8,
            layers: 3,
            hidden: 512,
            dropout: 0.3,
            geometry_init: 1.0,
            freeze_geometry: false,
            geometry: true,
        }
    }
}

/// Sizes taken from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabDims {
    pub fragments: usize,
    pub attach_types: usize,
    /// Actions including CAUTERIZE.
    pub outputs: usize,
}

/// Model input for one generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    /// Vocabulary fragment of each placed instance.
    pub fragments: Vec<usize>,
    /// Scaled dock saturation per instance.
    pub saturation: Vec<[f64; 3]>,
    /// Fragment-fragment distances, n × n.
    pub distances: Matrix,
    /// Instance holding the focal attachment.
    pub focal: usize,
    /// Distance of each fragment to the focal attachment.
    pub attach_distances: Vec<f64>,
    pub attach_type: usize,
    /// Standardized conditions.
    pub conditions: [f64; 3],
}

/// Single-head attention: softmax(QKᵀ/√d − a·D)·V. Without `dist` the
/// bias term is absent and `a` is unused.
pub fn geometry_attention(t: &mut Tape, q: Var, k: Var, v: Var, dist: Option<&Matrix>, a: Var) -> Var {
    let d = t.value(q).cols;
    let s = t.matmul_t(q, k);
    let mut s = t.scale(s, 1.0 / (d as f64).sqrt());
    if let Some(dist) = dist {
        s = t.dist_bias(s, a, dist.clone());
    }
    let p = t.softmax(s);
    t.matmul(p, v)
}

#[derive(Debug, Clone, PartialEq)]
struct LayerIds {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Ids {
    frag_emb: usize,
    attach_emb: usize,
    proj_w: usize,
    proj_b: usize,
    geometry: usize,
    layers: Vec<LayerIds>,
    lnf_g: usize,
    lnf_b: usize,
    head_w: usize,
    head_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoryModel {
    pub cfg: ModelConfig,
    pub dims: VocabDims,
    pub store: ParamStore,
    ids: Ids,
}

fn ones(n: usize) -> Matrix {
    Matrix::from_vec(1, n, vec![1.0; n])
}

impl StoryModel {
    pub fn new(cfg: ModelConfig, dims: VocabDims, seed: u64) -> StoryModel {
        assert!(cfg.layers >= 1, "at least one layer");
        assert!(cfg.heads >= 1 && cfg.frag_dim % cfg.heads == 0, "heads must divide frag_dim");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, da, h) = (cfg.frag_dim, cfg.attach_dim, cfg.hidden);
        let mut s = ParamStore::new();
        s.add_uniform("frag_emb", dims.fragments, d, 1, &mut rng);
        s.add_uniform("attach_emb", dims.attach_types.max(1), da, 1, &mut rng);
        s.add_uniform("proj.w", 6, d, 6, &mut rng);
        s.add("proj.b", Matrix::zeros(1, d));
        s.add("geometry_scale", Matrix::scalar(cfg.geometry_init));
        for l in 0..cfg.layers {
            let p = |n: &str| format!("layer{l}.{n}");
            s.add(&p("ln1.g"), ones(d));
            s.add(&p("ln1.b"), Matrix::zeros(1, d));
            for w in ["wq", "wk", "wv", "wo"] {
                s.add_uniform(&p(w), d, d, d, &mut rng);
            }
            s.add(&p("bo"), Matrix::zeros(1, d));
            s.add(&p("ln2.g"), ones(d));
            s.add(&p("ln2.b"), Matrix::zeros(1, d));
            s.add_uniform(&p("w1"), d, h, d, &mut rng);
            s.add(&p("b1"), Matrix::zeros(1, h));
            s.add_uniform(&p("w2"), h, d, h, &mut rng);
            s.add(&p("b2"), Matrix::zeros(1, d));
        }
        s.add("lnf.g", ones(d));
        s.add("lnf.b", Matrix::zeros(1, d));
        let head_in = d + 3 + da + 3;
        s.add_uniform("head.w", head_in, dims.outputs, head_in, &mut rng);
        s.add("head.b", Matrix::zeros(1, dims.outputs));
        StoryModel::from_store(cfg, dims, s).expect("fresh layout is complete")
    }

    /// Attach names to indices and check every shape against the config.
    pub fn from_store(cfg: ModelConfig, dims: VocabDims, mut store: ParamStore) -> Result<StoryModel, WeightsError> {
        let (d, da, h) = (cfg.frag_dim, cfg.attach_dim, cfg.hidden);
        let get = |s: &ParamStore, name: &str, shape: (usize, usize)| -> Result<usize, WeightsError> {
            let i = s.index(name).ok_or_else(|| WeightsError::Missing(name.to_string()))?;
            if s.get(i).shape() != shape {
                return Err(WeightsError::Shape {
                    name: name.to_string(),
                    found: s.get(i).shape(),
                    expected: shape,
                });
            }
            Ok(i)
        };
        let mut layers = Vec::new();
        for l in 0..cfg.layers {
            let p = |n: &str| format!("layer{l}.{n}");
            layers.push(LayerIds {
                ln1_g: get(&store, &p("ln1.g"), (1, d))?,
                ln1_b: get(&store, &p("ln1.b"), (1, d))?,
                wq: get(&store, &p("wq"), (d, d))?,
                wk: get(&store, &p("wk"), (d, d))?,
                wv: get(&store, &p("wv"), (d, d))?,
                wo: get(&store, &p("wo"), (d, d))?,
                bo: get(&store, &p("bo"), (1, d))?,
                ln2_g: get(&store, &p("ln2.g"), (1, d))?,
                ln2_b: get(&store, &p("ln2.b"), (1, d))?,
                w1: get(&store, &p("w1"), (d, h))?,
                b1: get(&store, &p("b1"), (1, h))?,
                w2: get(&store, &p("w2"), (h, d))?,
                b2: get(&store, &p("b2"), (1, d))?,
            });
        }
        let ids = Ids {
            frag_emb: get(&store, "frag_emb", (dims.fragments, d))?,
            attach_emb: get(&store, "attach_emb", (dims.attach_types.max(1), da))?,
            proj_w: get(&store, "proj.w", (6, d))?,
            proj_b: get(&store, "proj.b", (1, d))?,
            geometry: get(&store, "geometry_scale", (1, 1))?,
            layers,
            lnf_g: get(&store, "lnf.g", (1, d))?,
            lnf_b: get(&store, "lnf.b", (1, d))?,
            head_w: get(&store, "head.w", (d + 3 + da + 3, dims.outputs))?,
            head_b: get(&store, "head.b", (1, dims.outputs))?,
        };
        store.set_frozen(ids.geometry, cfg.freeze_geometry);
        Ok(StoryModel { cfg, dims, store, ids })
    }

    pub fn geometry_scale(&self) -> f64 {
        self.store.get(self.ids.geometry).data[0]
    }

    pub fn set_geometry_scale(&mut self, a: f64) {
        self.store.get_mut(self.ids.geometry).data[0] = a;
    }

    /// The same weights with the distance bias removed from every attention layer.
    pub fn without_geometry(&self) -> StoryModel {
        StoryModel {
            cfg: ModelConfig {
                geometry: false,
                ..self.cfg
            },
            ..self.clone()
        }
    }

    fn dropout(&self, t: &mut Tape, x: Var, rng: &mut Option<ChaCha8Rng>) -> Var {
        let Some(r) = rng.as_mut() else { return x };
        let p = self.cfg.dropout;
        if p <= 0.0 {
            return x;
        }
        let (rows, cols) = t.value(x).shape();
        let keep = 1.0 / (1.0 - p);
        let mask = (0..rows * cols)
            .map(|_| if r.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        t.mask(x, Matrix::from_vec(rows, cols, mask))
    }

    fn attention(&self, t: &mut Tape, q: Var, k: Var, v: Var, dist: &Matrix, a: Var) -> Var {
        let dh = self.cfg.frag_dim / self.cfg.heads;
        let mut heads = Vec::with_capacity(self.cfg.heads);
        for h in 0..self.cfg.heads {
            let qh = t.slice_cols(q, h * dh, dh);
            let kh = t.slice_cols(k, h * dh, dh);
            let vh = t.slice_cols(v, h * dh, dh);
            let bias = self.cfg.geometry.then_some(dist);
            heads.push(geometry_attention(t, qh, kh, vh, bias, a));
        }
        if heads.len() == 1 {
            heads[0]
        } else {
            t.concat(&heads)
        }
    }

    fn feed_forward(&self, t: &mut Tape, x: Var, l: &LayerIds, rng: &mut Option<ChaCha8Rng>) -> Var {
        let (g, b) = (t.param(l.ln2_g), t.param(l.ln2_b));
        let h = t.layer_norm(x, g, b);
        let w1 = t.param(l.w1);
        let b1 = t.param(l.b1);
        let u = t.matmul(h, w1);
        let u = t.add_row(u, b1);
        let u = t.gelu(u);
        let w2 = t.param(l.w2);
        let b2 = t.param(l.b2);
        let o = t.matmul(u, w2);
        let o = t.add_row(o, b2);
        let o = self.dropout(t, o, rng);
        t.add(x, o)
    }

    /// Records the forward pass and returns the 1 × outputs logits node.
    /// Dropout is applied only when `rng` is given.
    pub fn forward(&self, t: &mut Tape, x: &StepInput, mut rng: Option<ChaCha8Rng>) -> Var {
        let n = x.fragments.len();
        assert!(n >= 1 && x.focal < n, "state needs the focal fragment");
        assert_eq!(x.distances.shape(), (n, n), "distance matrix shape");
        assert_eq!(x.attach_distances.len(), n, "attachment distance count");
        let ids = &self.ids;

        let emb = t.param(ids.frag_emb);
        let e = t.gather(emb, &x.fragments);
        let mut sc = Matrix::zeros(n, 6);
        for i in 0..n {
            sc.row_mut(i)[..3].copy_from_slice(&x.saturation[i]);
            sc.row_mut(i)[3..].copy_from_slice(&x.conditions);
        }
        let sc = t.input(sc);
        let pw = t.param(ids.proj_w);
        let pb = t.param(ids.proj_b);
        let p = t.matmul(sc, pw);
        let p = t.add_row(p, pb);
        let mut h = t.add(e, p);
        let a = t.param(ids.geometry);

        let last = self.cfg.layers - 1;
        for (li, l) in ids.layers.iter().enumerate() {
            let (g, b) = (t.param(l.ln1_g), t.param(l.ln1_b));
            let hn = t.layer_norm(h, g, b);
            let (wq, wk, wv) = (t.param(l.wq), t.param(l.wk), t.param(l.wv));
            let k = t.matmul(hn, wk);
            let v = t.matmul(hn, wv);
            let (q, dist, resid) = if li < last {
                (t.matmul(hn, wq), x.distances.clone(), h)
            } else {
                let fq = t.row(hn, x.focal);
                let fr = t.row(h, x.focal);
                (
                    t.matmul(fq, wq),
                    Matrix::row_vector(x.attach_distances.clone()),
                    fr,
                )
            };
            let att = self.attention(t, q, k, v, &dist, a);
            let (wo, bo) = (t.param(l.wo), t.param(l.bo));
            let o = t.matmul(att, wo);
            let o = t.add_row(o, bo);
            let o = self.dropout(t, o, &mut rng);
            let r = t.add(resid, o);
            h = self.feed_forward(t, r, l, &mut rng);
        }
        let (g, b) = (t.param(ids.lnf_g), t.param(ids.lnf_b));
        let z = t.layer_norm(h, g, b);
        let fsat = t.input(Matrix::row_vector(x.saturation[x.focal].to_vec()));
        let aemb = t.param(ids.attach_emb);
        let ae = t.gather(aemb, &[x.attach_type]);
        let cond = t.input(Matrix::row_vector(x.conditions.to_vec()));
        let head_in = t.concat(&[z, fsat, ae, cond]);
        let (hw, hb) = (t.param(ids.head_w), t.param(ids.head_b));
        let logits = t.matmul(head_in, hw);
        t.add_row(logits, hb)
    }

    /// Inference logits (dropout off).
    pub fn logits(&self, x: &StepInput) -> Vec<f64> {
        let mut t = Tape::new(&self.store);
        let out = self.forward(&mut t, x, None);
        t.value(out).data.clone()
    }

    fn sample_loss(&self, x: &StepInput, label: usize, dropout_seed: Option<u64>) -> (f64, Vec<Matrix>) {
        let mut t = Tape::new(&self.store);
        let rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let logits = self.forward(&mut t, x, rng);
        let loss = t.cross_entropy(logits, label);
        (t.value(loss).data[0], t.backward(loss))
    }

    /// Mean negative log-likelihood of the labels and its gradient.
    ///
    /// Samples are split into fixed chunks that are reduced in order, so the
    /// result does not depend on the number of worker threads. With
    /// `dropout_seed` set, sample `i` draws its masks from a stream derived
    /// from (seed, i).
    pub fn loss_and_grads(&self, batch: &[(StepInput, usize)], dropout_seed: Option<u64>) -> (f64, Vec<Matrix>) {
        const CHUNK: usize = 8;
        let n = batch.len().max(1) as f64;
        let partial: Vec<(f64, Vec<Matrix>)> = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut total = 0.0;
                let mut acc: Option<Vec<Matrix>> = None;
                for (k, (x, label)) in chunk.iter().enumerate() {
                    let seed = dropout_seed.map(|s| stable_hash(&[s, (c * CHUNK + k) as u64]));
                    let (l, g) = self.sample_loss(x, *label, seed);
                    total += l;
                    match &mut acc {
                        None => acc = Some(g),
                        Some(a) => a.iter_mut().zip(&g).for_each(|(a, g)| a.add_assign(g)),
                    }
                }
                (total, acc.unwrap_or_default())
            })
            .collect();
        let mut loss = 0.0;
        let mut grads: Vec<Matrix> = self
            .store
            .tensors()
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect();
        for (l, g) in partial {
            loss += l;
            grads.iter_mut().zip(&g).for_each(|(a, g)| a.add_assign(g));
        }
        for g in &mut grads {
            g.data.iter_mut().for_each(|x| *x /= n);
        }
        (loss / n, grads)
    }
}
