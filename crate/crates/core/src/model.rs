//! The recommendation network.
//!
//! Two branches read the same user and item embeddings. The GMF branch
//! projects both to `gmf_dim` and takes their elementwise product; the MLP
//! tower runs over their concatenation with ReLU after every layer. The
//! branch outputs are concatenated, optionally extended with social
//! background, and mapped to a purchase probability:
//!
//! - [`Fusion::None`]: `[z_gmf; z_mlp]`
//! - [`Fusion::Average`]: `[z_gmf; z_mlp; S_t]` with `S_t` the mean hourly
//!   embedding of the previous segment
//! - [`Fusion::Iste`]: `[z_gmf; z_mlp; c_i]` with `c_i` an attention-weighted
//!   sum of the last `k` hourly embeddings, queried by the projected item
//!   embedding through a bilinear score `h_i^T W s_j`.
//!
//! The head is a single affine map to a logit, or with `deep_head` a ReLU
//! hidden layer of `head_hidden` units followed by the affine map.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Tape, Tensor, Var};
use crate::rng::SeededRng;
use crate::{Error, Result};

use crate::autodiff::kernels;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fusion {
    None,
    Average,
    Iste,
}

impl Fusion {
    pub const ALL: [Fusion; 3] = [Fusion::None, Fusion::Average, Fusion::Iste];

    pub fn as_str(self) -> &'static str {
        match self {
            Fusion::None => "none",
            Fusion::Average => "average",
            Fusion::Iste => "iste",
        }
    }

    pub fn uses_social(self) -> bool {
        self != Fusion::None
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fusion::None),
            "average" => Ok(Fusion::Average),
            "iste" => Ok(Fusion::Iste),
            other => Err(Error::InvalidConfig(format!("unknown fusion mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub emb_dim: usize,
    pub gmf_dim: usize,
    pub mlp_layers: Vec<usize>,
    pub social_dim: usize,
    pub k: usize,
    pub fusion: Fusion,
    pub deep_head: bool,
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            emb_dim: 200,
            gmf_dim: 50,
            mlp_layers: vec![200, 100, 50],
            social_dim: 50,
            k: 24,
            fusion: Fusion::None,
            deep_head: false,
            head_hidden: 100,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.emb_dim == 0 || self.gmf_dim == 0 || self.social_dim == 0 || self.k == 0 {
            return bad(format!("model dimensions and k must be positive: {self:?}"));
        }
        if self.mlp_layers.is_empty() || self.mlp_layers.contains(&0) {
            return bad(format!("invalid mlp layers {:?}", self.mlp_layers));
        }
        if self.mlp_layers.last() != Some(&self.gmf_dim) {
            return bad(format!(
                "last mlp layer {:?} must equal gmf_dim {}",
                self.mlp_layers.last(),
                self.gmf_dim
            ));
        }
        if self.fusion == Fusion::Iste && self.social_dim != self.gmf_dim {
            return bad(format!(
                "attention needs social_dim ({}) = gmf_dim ({})",
                self.social_dim, self.gmf_dim
            ));
        }
        if self.deep_head && self.head_hidden == 0 {
            return bad("head_hidden must be positive".into());
        }
        Ok(())
    }

    /// Width of the concatenation layer.
    pub fn concat_width(&self) -> usize {
        2 * self.gmf_dim + if self.fusion.uses_social() { self.social_dim } else { 0 }
    }
}

/// Affine layer `weight [out, in] * x + bias [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    fn glorot(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Dense {
        Dense {
            weight: glorot(rng, fan_out, fan_in),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim()];
        kernels::matvec(self.weight.data(), x, &mut out);
        for (o, b) in out.iter_mut().zip(self.bias.data()) {
            *o += b;
        }
        out
    }
}

/// Uniform in `±sqrt(6 / (rows + cols))`, shape `[rows, cols]`.
fn glorot(rng: &mut SeededRng, rows: usize, cols: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.range_f64(-bound, bound)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub gmf_user: Dense,
    pub gmf_item: Dense,
    pub tower: Vec<Dense>,
    /// `gmf_dim x social_dim`, present for [`Fusion::Iste`].
    pub attention: Option<Tensor>,
    /// Present with `deep_head`.
    pub head_hidden: Option<Dense>,
    pub head: Dense,
}

/// Glorot-uniform weights and zero biases, deterministic per seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let base = SeededRng::new(seed);
    let rng = |label: u64| base.derive(label);
    let gmf_user = Dense::glorot(&mut rng(1), config.emb_dim, config.gmf_dim);
    let gmf_item = Dense::glorot(&mut rng(2), config.emb_dim, config.gmf_dim);
    let mut tower = Vec::with_capacity(config.mlp_layers.len());
    let mut fan_in = 2 * config.emb_dim;
    for (l, &width) in config.mlp_layers.iter().enumerate() {
        tower.push(Dense::glorot(&mut rng(10 + l as u64), fan_in, width));
        fan_in = width;
    }
    let attention = (config.fusion == Fusion::Iste)
        .then(|| glorot(&mut rng(3), config.gmf_dim, config.social_dim));
    let mut head_in = config.concat_width();
    let head_hidden = config.deep_head.then(|| {
        let d = Dense::glorot(&mut rng(4), head_in, config.head_hidden);
        head_in = config.head_hidden;
        d
    });
    let head = Dense::glorot(&mut rng(5), head_in, 1);
    Ok(ModelParams {
        gmf_user,
        gmf_item,
        tower,
        attention,
        head_hidden,
        head,
    })
}

impl ModelParams {
    /// Parameter tensor names in serialization order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut dense = |name: &str| {
            names.push(format!("{name}.weight"));
            names.push(format!("{name}.bias"));
        };
        dense("gmf_user");
        dense("gmf_item");
        for l in 0..self.tower.len() {
            dense(&format!("tower.{l}"));
        }
        if self.attention.is_some() {
            names.push("attention".into());
        }
        if self.head_hidden.is_some() {
            names.push("head_hidden.weight".into());
            names.push("head_hidden.bias".into());
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    /// Parameter tensors in serialization order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for d in [&self.gmf_user, &self.gmf_item].into_iter().chain(&self.tower) {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        if let Some(a) = &self.attention {
            out.push(a);
        }
        if let Some(h) = &self.head_hidden {
            out.push(&h.weight);
            out.push(&h.bias);
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        let ModelParams {
            gmf_user,
            gmf_item,
            tower,
            attention,
            head_hidden,
            head,
        } = self;
        for d in [gmf_user, gmf_item].into_iter().chain(tower.iter_mut()) {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        if let Some(a) = attention {
            out.push(a);
        }
        if let Some(h) = head_hidden {
            out.push(&mut h.weight);
            out.push(&mut h.bias);
        }
        out.push(&mut head.weight);
        out.push(&mut head.bias);
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Rebuilds parameters from tensors in [`ModelParams::tensors`] order,
    /// checking every shape against `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor>) -> Result<ModelParams> {
        let template = init_params(config, 0)?;
        let expected: Vec<Vec<usize>> = template.tensors().iter().map(|t| t.shape().to_vec()).collect();
        if tensors.len() != expected.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (t, shape) in tensors.iter().zip(&expected) {
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "from_tensors",
                    left: shape.clone(),
                    right: t.shape().to_vec(),
                });
            }
        }
        let mut params = template;
        for (dst, src) in params.tensors_mut().into_iter().zip(tensors) {
            *dst = src;
        }
        Ok(params)
    }
}

/// Social input matching the fusion mode.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Social<'a> {
    None,
    /// `S_t`, length `social_dim`.
    Average(&'a [f64]),
    /// `k x social_dim` row-major keys.
    Keys(&'a [f64]),
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PredictionInput<'a> {
    pub user: &'a [f64],
    pub item: &'a [f64],
    pub social: Social<'a>,
}

fn dim_error(op: &'static str, want: usize, got: usize) -> Error {
    Error::ShapeMismatch {
        op,
        left: vec![want],
        right: vec![got],
    }
}

fn check_input(input: &PredictionInput<'_>, config: &ModelConfig) -> Result<()> {
    if input.user.len() != config.emb_dim {
        return Err(dim_error("user embedding", config.emb_dim, input.user.len()));
    }
    if input.item.len() != config.emb_dim {
        return Err(dim_error("item embedding", config.emb_dim, input.item.len()));
    }
    match (config.fusion, input.social) {
        (Fusion::None, Social::None) => Ok(()),
        (Fusion::Average, Social::Average(s)) if s.len() == config.social_dim => Ok(()),
        (Fusion::Iste, Social::Keys(k)) if k.len() == config.k * config.social_dim => Ok(()),
        (f, _) => Err(Error::FusionMismatch {
            expected: match f {
                Fusion::None => "no social input",
                Fusion::Average => "segment average of social_dim",
                Fusion::Iste => "k x social_dim keys",
            },
        }),
    }
}

/// GMF branch: returns `(z_gmf, h_i)` where `h_i` is the projected item
/// embedding (also the attention query).
pub fn gmf_branch(user: &[f64], item: &[f64], params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let emb = params.gmf_user.in_dim();
    if user.len() != emb || item.len() != emb {
        return Err(dim_error("gmf_branch", emb, user.len().max(item.len())));
    }
    let pu = params.gmf_user.apply(user);
    let hi = params.gmf_item.apply(item);
    let z = pu.iter().zip(&hi).map(|(a, b)| a * b).collect();
    Ok((z, hi))
}

/// MLP tower over `[user; item]`, ReLU after every layer.
pub fn mlp_branch(user: &[f64], item: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let first = &params.tower[0];
    if user.len() + item.len() != first.in_dim() {
        return Err(dim_error("mlp_branch", first.in_dim(), user.len() + item.len()));
    }
    let mut x: Vec<f64> = user.iter().chain(item).copied().collect();
    for layer in &params.tower {
        x = layer.apply(&x);
        x.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(x)
}

/// Attention over `k` keys with scores `h_i^T W s_j`. Returns the context
/// vector and the attention weights.
pub fn iste_context(query: &[f64], keys: &[f64], w_att: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let (rows, cols) = (w_att.shape()[0], w_att.shape()[1]);
    if query.len() != rows || keys.is_empty() || !keys.len().is_multiple_of(cols) {
        return Err(Error::ShapeMismatch {
            op: "iste_context",
            left: w_att.shape().to_vec(),
            right: vec![query.len(), keys.len()],
        });
    }
    let mut projected = vec![0.0; cols];
    kernels::vecmat(query, w_att.data(), &mut projected);
    let k = keys.len() / cols;
    let mut scores = vec![0.0; k];
    kernels::matvec(keys, &projected, &mut scores);
    let weights = crate::autodiff::softmax(&scores);
    let mut context = vec![0.0; cols];
    kernels::vecmat(&weights, keys, &mut context);
    Ok((context, weights))
}

fn head_logit(concat: &[f64], params: &ModelParams) -> f64 {
    match &params.head_hidden {
        Some(hidden) => {
            let mut h = hidden.apply(concat);
            h.iter_mut().for_each(|v| *v = v.max(0.0));
            params.head.apply(&h)[0]
        }
        None => params.head.apply(concat)[0],
    }
}

/// Purchase probability for one `(user, time, item)` input.
pub fn predict(input: &PredictionInput<'_>, params: &ModelParams, config: &ModelConfig) -> Result<f64> {
    check_input(input, config)?;
    let (mut concat, query) = gmf_branch(input.user, input.item, params)?;
    concat.extend(mlp_branch(input.user, input.item, params)?);
    match input.social {
        Social::None => {}
        Social::Average(s) => concat.extend_from_slice(s),
        Social::Keys(keys) => {
            let w = params.attention.as_ref().ok_or(Error::FusionMismatch {
                expected: "attention parameters",
            })?;
            concat.extend(iste_context(&query, keys, w)?.0);
        }
    }
    Ok(crate::autodiff::sigmoid_scalar(head_logit(&concat, params)))
}

/// Tape handles for every parameter tensor.
#[derive(Clone, Debug)]
pub struct ParamVars {
    vars: Vec<Var>,
    n_tower: usize,
    attention: bool,
    deep_head: bool,
}

impl ParamVars {
    /// Registers `params` on `tape` as borrowed trainable leaves.
    pub fn register<'a>(tape: &mut Tape<'a>, params: &'a ModelParams) -> ParamVars {
        let vars = params.tensors().into_iter().map(|t| tape.param(t)).collect();
        Self::from_vars(vars, params.tower.len(), params.attention.is_some(), params.head_hidden.is_some())
    }

    /// Wraps vars already on a tape, in [`ModelParams::tensors`] order.
    pub fn from_vars(vars: Vec<Var>, n_tower: usize, attention: bool, deep_head: bool) -> ParamVars {
        ParamVars {
            vars,
            n_tower,
            attention,
            deep_head,
        }
    }

    pub fn for_config(vars: &[Var], config: &ModelConfig) -> ParamVars {
        Self::from_vars(
            vars.to_vec(),
            config.mlp_layers.len(),
            config.fusion == Fusion::Iste,
            config.deep_head,
        )
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn dense(&self, slot: usize) -> (Var, Var) {
        (self.vars[2 * slot], self.vars[2 * slot + 1])
    }

    fn gmf_user(&self) -> (Var, Var) {
        self.dense(0)
    }

    fn gmf_item(&self) -> (Var, Var) {
        self.dense(1)
    }

    fn tower(&self, l: usize) -> (Var, Var) {
        self.dense(2 + l)
    }

    fn after_dense(&self) -> usize {
        2 * (2 + self.n_tower)
    }

    fn attention(&self) -> Option<Var> {
        self.attention.then(|| self.vars[self.after_dense()])
    }

    fn head_hidden(&self) -> Option<(Var, Var)> {
        let base = self.after_dense() + self.attention as usize;
        self.deep_head.then(|| (self.vars[base], self.vars[base + 1]))
    }

    fn head(&self) -> (Var, Var) {
        let n = self.vars.len();
        (self.vars[n - 2], self.vars[n - 1])
    }
}

fn affine(tape: &mut Tape<'_>, (w, b): (Var, Var), x: Var) -> Result<Var> {
    let y = tape.matvec(w, x)?;
    tape.add(y, b)
}

/// Records the forward pass on `tape` and returns the probability node.
pub fn forward<'a>(
    tape: &mut Tape<'a>,
    vars: &ParamVars,
    input: &PredictionInput<'a>,
    config: &ModelConfig,
) -> Result<Var> {
    check_input(input, config)?;
    let user = tape.constant(&[config.emb_dim], input.user)?;
    let item = tape.constant(&[config.emb_dim], input.item)?;

    let pu = affine(tape, vars.gmf_user(), user)?;
    let hi = affine(tape, vars.gmf_item(), item)?;
    let z_gmf = tape.mul(pu, hi)?;

    let mut x = tape.concat(&[user, item])?;
    for l in 0..config.mlp_layers.len() {
        let pre = affine(tape, vars.tower(l), x)?;
        x = tape.relu(pre);
    }
    let mut parts = vec![z_gmf, x];
    match input.social {
        Social::None => {}
        Social::Average(s) => parts.push(tape.constant(&[config.social_dim], s)?),
        Social::Keys(keys) => {
            let w = vars.attention().ok_or(Error::FusionMismatch {
                expected: "attention parameters",
            })?;
            let keys = tape.constant(&[config.k, config.social_dim], keys)?;
            let projected = tape.vecmat(hi, w)?;
            let scores = tape.matvec(keys, projected)?;
            let weights = tape.softmax(scores)?;
            parts.push(tape.vecmat(weights, keys)?);
        }
    }
    let concat = tape.concat(&parts)?;
    let logit = match vars.head_hidden() {
        Some(hidden) => {
            let h = affine(tape, hidden, concat)?;
            let h = tape.relu(h);
            affine(tape, vars.head(), h)?
        }
        None => affine(tape, vars.head(), concat)?,
    };
    Ok(tape.sigmoid(logit))
}

/// User-side quantities reused across all candidates of a task.
#[derive(Clone, Debug)]
pub struct PreparedUser {
    gmf: Vec<f64>,
    tower_partial: Vec<f64>,
}

/// Item-side quantities reused across users and tasks.
#[derive(Clone, Debug)]
pub struct PreparedItem {
    gmf: Vec<f64>,
    tower_partial: Vec<f64>,
    /// `h_i^T W`, present with attention.
    query: Option<Vec<f64>>,
}

/// Scoring that caches everything depending on only the user or only the
/// item. Agrees with [`predict`] up to floating-point summation order.
#[derive(Clone, Debug)]
pub struct FastScorer<'p> {
    params: &'p ModelParams,
    config: &'p ModelConfig,
}

impl<'p> FastScorer<'p> {
    pub fn new(params: &'p ModelParams, config: &'p ModelConfig) -> Self {
        FastScorer { params, config }
    }

    fn first_half(&self, x: &[f64], offset: usize) -> Vec<f64> {
        let first = &self.params.tower[0];
        let cols = first.in_dim();
        let emb = self.config.emb_dim;
        first
            .weight
            .data()
            .chunks_exact(cols)
            .map(|row| kernels::dot(&row[offset..offset + emb], x))
            .collect()
    }

    pub fn prepare_user(&self, user: &[f64]) -> PreparedUser {
        let mut tower_partial = self.first_half(user, 0);
        for (t, b) in tower_partial.iter_mut().zip(self.params.tower[0].bias.data()) {
            *t += b;
        }
        PreparedUser {
            gmf: self.params.gmf_user.apply(user),
            tower_partial,
        }
    }

    pub fn prepare_item(&self, item: &[f64]) -> PreparedItem {
        let gmf = self.params.gmf_item.apply(item);
        let query = self.params.attention.as_ref().map(|w| {
            let mut q = vec![0.0; w.shape()[1]];
            kernels::vecmat(&gmf, w.data(), &mut q);
            q
        });
        PreparedItem {
            tower_partial: self.first_half(item, self.config.emb_dim),
            gmf,
            query,
        }
    }

    /// Probability for a prepared pair. `social` must match the fusion mode.
    pub fn score(&self, user: &PreparedUser, item: &PreparedItem, social: Social<'_>) -> f64 {
        let mut concat: Vec<f64> = user.gmf.iter().zip(&item.gmf).map(|(a, b)| a * b).collect();
        let mut x: Vec<f64> = user
            .tower_partial
            .iter()
            .zip(&item.tower_partial)
            .map(|(a, b)| (a + b).max(0.0))
            .collect();
        for layer in &self.params.tower[1..] {
            x = layer.apply(&x);
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        concat.extend(x);
        match social {
            Social::None => {}
            Social::Average(s) => concat.extend_from_slice(s),
            Social::Keys(keys) => {
                let q = item.query.as_ref().expect("attention parameters");
                let mut scores = vec![0.0; keys.len() / q.len()];
                kernels::matvec(keys, q, &mut scores);
                let weights = crate::autodiff::softmax(&scores);
                let mut context = vec![0.0; q.len()];
                kernels::vecmat(&weights, keys, &mut context);
                concat.extend(context);
            }
        }
        crate::autodiff::sigmoid_scalar(head_logit(&concat, self.params))
    }
}
