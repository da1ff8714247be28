//! Server-client and fully decentralized federated power iteration over
//! vertically partitioned data.

use std::time::Instant;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{center_kernel, kernel_eigenpairs, kernel_matrix, KernelSpec};
use crate::linalg::{
    canonicalize_sign, dot, gram_matrix, normalize, power_iteration, rayleigh_quotient,
    top_k_eigen_oracle, DenseMatrix, EigenPair, ORACLE_MAX_ITERS, ORACLE_TOL,
};
use crate::metrics::{RoundObservation, RunTrace};
use crate::topology::TopologyGraph;

/// Squared-norm threshold below which [`local_update`] leaves the block alone.
pub const UPDATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Plain,
    #[serde(rename = "scaled")]
    WeightScaled,
}

/// What each client eigendecomposes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalMode {
    /// `(1/fᵢ) Xᵢ Xᵢᵀ`
    Pca,
    /// Kernel matrix over the rows of `Xᵢ`.
    Akpca { kernel: KernelSpec, center: bool },
}

impl LocalMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            LocalMode::Pca => Ok(()),
            LocalMode::Akpca { kernel, .. } => kernel.validate(),
        }
    }

    fn is_psd(&self) -> bool {
        match self {
            LocalMode::Pca => true,
            LocalMode::Akpca { kernel, .. } => kernel.is_psd(),
        }
    }

    /// The matrix a client holding `block` iterates on.
    pub fn local_matrix(&self, block: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LocalMode::Pca => gram_matrix(block, 1.0 / block.cols() as f64),
            LocalMode::Akpca { kernel, center } => {
                let k = kernel_matrix(kernel, block)?;
                if *center {
                    center_kernel(&k)
                } else {
                    Ok(k)
                }
            }
        }
    }

    /// Top eigenpair of the matrix built from the unsplit data.
    pub fn global_reference(&self, x: &DenseMatrix) -> Result<(DenseMatrix, EigenPair)> {
        let global = self.local_matrix(x)?;
        let mut pairs = match self {
            LocalMode::Pca => top_k_eigen_oracle(&global, 1, ORACLE_MAX_ITERS, ORACLE_TOL)?,
            LocalMode::Akpca { kernel, .. } => kernel_eigenpairs(&global, 1, kernel.is_psd())?,
        };
        Ok((global, pairs.remove(0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub rounds: usize,
    pub local_iters: usize,
    pub tol: f64,
    pub merge_mode: MergeMode,
    pub warm_start: bool,
    pub mode: LocalMode,
    pub update_local_data: bool,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            local_iters: 10,
            tol: crate::linalg::DEFAULT_TOL,
            merge_mode: MergeMode::Plain,
            warm_start: false,
            mode: LocalMode::Pca,
            update_local_data: false,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::spec("rounds", "must be at least 1"));
        }
        if self.local_iters == 0 {
            return Err(Error::spec("local_iters", "must be at least 1"));
        }
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(Error::spec(
                "tol",
                format!("must be finite and >= 0, got {}", self.tol),
            ));
        }
        self.mode
            .validate()
            .map_err(|e| Error::spec("kernel", e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub block: DenseMatrix,
    pub local_matrix: DenseMatrix,
    /// `None` until the first local round.
    pub eigen: Option<EigenPair>,
}

pub fn make_clients(blocks: Vec<DenseMatrix>, mode: &LocalMode) -> Result<Vec<ClientState>> {
    let Some(first) = blocks.first() else {
        return Err(Error::NoClients);
    };
    let n = first.rows();
    blocks
        .into_iter()
        .enumerate()
        .map(|(id, block)| {
            if block.rows() != n {
                return Err(Error::SampleCountMismatch {
                    block: id,
                    expected: n,
                    found: block.rows(),
                });
            }
            let local_matrix = mode.local_matrix(&block)?;
            Ok(ClientState {
                id,
                block,
                local_matrix,
                eigen: None,
            })
        })
        .collect()
}

/// Runs up to `local_iters` power steps on the client's matrix from `init`
/// and stores the result.
pub fn local_round(
    client: &mut ClientState,
    init: &[f64],
    local_iters: usize,
    tol: f64,
) -> Result<EigenPair> {
    let (pair, _) = power_iteration(&client.local_matrix, init, local_iters, tol)?;
    client.eigen = Some(pair.clone());
    Ok(pair)
}

/// `ωᵢ = αᵢ / Σα`.
pub fn compute_weights(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::NoClients);
    }
    if let Some(&value) = alphas.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::NegativeEigenvalue { value });
    }
    let total: f64 = alphas.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(alphas.iter().map(|a| a / total).collect())
}

/// `Σ ωᵢ aᵢ` without renormalization.
pub fn merge(vectors: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let Some(first) = vectors.first() else {
        return Err(Error::NoClients);
    };
    if vectors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            left: vectors.len(),
            right: weights.len(),
        });
    }
    let n = first.len();
    let mut out = vec![0.0; n];
    for (v, w) in vectors.iter().zip(weights) {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: v.len(),
            });
        }
        out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

/// Flips every vector whose dot product with `reference` is negative.
pub fn sign_align(vectors: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            if dot(v, reference) < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v.clone()
            }
        })
        .collect()
}

/// Per-client coefficients `(1 ± η) ωᵢ` with `η = 1/p`, in input order. The
/// first `⌈p/2⌉` clients by descending `α` (ties to the lower index) get
/// `1 + η`.
pub fn weight_scaling_coefficients(alphas: &[f64]) -> Result<Vec<f64>> {
    let weights = compute_weights(alphas)?;
    let p = alphas.len();
    let eta = weights.iter().sum::<f64>() / p as f64;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| alphas[b].total_cmp(&alphas[a]).then(a.cmp(&b)));
    let boosted = p.div_ceil(2);
    let mut coeffs = vec![0.0; p];
    for (rank, &i) in order.iter().enumerate() {
        let factor = if rank < boosted { 1.0 + eta } else { 1.0 - eta };
        coeffs[i] = factor * weights[i];
    }
    Ok(coeffs)
}

pub fn weight_scaled_merge(vectors: &[Vec<f64>], alphas: &[f64]) -> Result<Vec<f64>> {
    if vectors.len() != alphas.len() {
        return Err(Error::DimensionMismatch {
            left: vectors.len(),
            right: alphas.len(),
        });
    }
    merge(vectors, &weight_scaling_coefficients(alphas)?)
}

/// `X (M Mᵀ) / ‖M‖²` with `M = Xᵀ û`, where `û` is `u` normalized. Returns
/// `X` unchanged when `‖M‖² ≤ eps`.
pub fn local_update(x: &DenseMatrix, u: &[f64], eps: f64) -> Result<DenseMatrix> {
    if u.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            left: x.rows(),
            right: u.len(),
        });
    }
    let u = normalize(u)?;
    let (n, f) = x.shape();
    let mut m = vec![0.0; f];
    for (row, &ui) in x.row_iter().zip(&u) {
        m.iter_mut().zip(row).for_each(|(mj, xij)| *mj += xij * ui);
    }
    let m_sq = dot(&m, &m);
    if m_sq <= eps {
        return Ok(x.clone());
    }
    let xm = x.mul_vec(&m)?;
    let mut data = Vec::with_capacity(n * f);
    for xmi in xm {
        let s = xmi / m_sq;
        data.extend(m.iter().map(|mj| s * mj));
    }
    DenseMatrix::new(n, f, data)
}

/// Scalars exchanged per server-client round: `p(n+1)` up, `p·n` down.
pub fn server_round_message_count(p: usize, n: usize) -> u64 {
    (p * (n + 1) + p * n) as u64
}

/// The generator behind every seeded start vector of a run.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian direction normalized to the unit sphere.
pub fn random_unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

struct Rngs {
    main: ChaCha8Rng,
    fallback: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        let mut fallback = init_rng(seed);
        fallback.set_stream(1);
        Self {
            main: init_rng(seed),
            fallback,
        }
    }
}

fn wrap(round: usize, client: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Client {
        round,
        client,
        source: Box::new(e),
    }
}

// Local power iteration with one seeded retry when `init` lies in the null
// space.
fn train_client(
    client: &mut ClientState,
    init: &[f64],
    config: &FederationConfig,
    rngs: &mut Rngs,
    round: usize,
) -> Result<EigenPair> {
    let run = |c: &mut ClientState, v: &[f64]| local_round(c, v, config.local_iters, config.tol);
    let mut pair = match run(client, init) {
        Err(Error::ZeroImage) => {
            debug!(
                "round {round}, client {}: zero image, retrying from a random vector",
                client.id
            );
            let retry = random_unit_vector(&mut rngs.fallback, init.len());
            run(client, &retry)
        }
        other => other,
    }
    .map_err(wrap(round, client.id))?;
    if pair.value < 0.0 {
        if config.mode.is_psd() {
            pair.value = 0.0;
            client.eigen = Some(pair.clone());
        } else {
            return Err(wrap(round, client.id)(Error::NegativeEigenvalue {
                value: pair.value,
            }));
        }
    }
    Ok(pair)
}

fn merge_by_mode(mode: MergeMode, vectors: &[Vec<f64>], alphas: &[f64]) -> Result<Vec<f64>> {
    match mode {
        MergeMode::Plain => merge(vectors, &compute_weights(alphas)?),
        MergeMode::WeightScaled => weight_scaled_merge(vectors, alphas),
    }
}

fn apply_update(client: &mut ClientState, u: &[f64], mode: &LocalMode, round: usize) -> Result<()> {
    let updated = local_update(&client.block, u, UPDATE_EPS).map_err(wrap(round, client.id))?;
    client.local_matrix = mode
        .local_matrix(&updated)
        .map_err(wrap(round, client.id))?;
    client.block = updated;
    Ok(())
}

struct Setup {
    n: usize,
    global: DenseMatrix,
    reference: Vec<f64>,
}

fn setup(clients: &[ClientState], config: &FederationConfig) -> Result<Setup> {
    config.validate()?;
    let Some(first) = clients.first() else {
        return Err(Error::NoClients);
    };
    let n = first.block.rows();
    let blocks: Vec<DenseMatrix> = clients.iter().map(|c| c.block.clone()).collect();
    let (global, pair) = config
        .mode
        .global_reference(&DenseMatrix::hstack(&blocks)?)?;
    Ok(Setup {
        n,
        global,
        reference: pair.vector,
    })
}

fn finish(mut trace: RunTrace, global: &DenseMatrix) -> Result<RunTrace> {
    let mut vector = trace
        .rounds
        .last()
        .map(|r| r.federated_vector.clone())
        .ok_or(Error::NoClients)?;
    canonicalize_sign(&mut vector);
    let value = rayleigh_quotient(global, &vector)?;
    trace.final_pair = Some(EigenPair { vector, value });
    Ok(trace)
}

/// Central-server protocol: local training, weighted merge at the server,
/// broadcast, optional local data update.
pub fn run_server_client(
    clients: &mut [ClientState],
    config: &FederationConfig,
) -> Result<RunTrace> {
    let Setup {
        n,
        global,
        reference,
    } = setup(clients, config)?;
    let p = clients.len();
    let mut rngs = Rngs::new(config.seed);
    let mut trace = RunTrace::new(config.rounds);
    let mut previous: Option<Vec<f64>> = None;
    for t in 0..config.rounds {
        let start = Instant::now();
        let mut vectors = Vec::with_capacity(p);
        let mut alphas = Vec::with_capacity(p);
        for client in clients.iter_mut() {
            let init = match (&previous, config.warm_start) {
                (Some(u), true) => u.clone(),
                _ => random_unit_vector(&mut rngs.main, n),
            };
            let pair = train_client(client, &init, config, &mut rngs, t)?;
            vectors.push(pair.vector);
            alphas.push(pair.value);
        }
        let anchor = previous.clone().unwrap_or_else(|| vectors[0].clone());
        let aligned = sign_align(&vectors, &anchor);
        let weights = compute_weights(&alphas)?;
        let u = normalize(&merge_by_mode(config.merge_mode, &aligned, &alphas)?)?;
        if config.update_local_data {
            for client in clients.iter_mut() {
                apply_update(client, &u, &config.mode, t)?;
            }
        }
        let record = trace.record_round(
            RoundObservation {
                federated_vector: u.clone(),
                client_vectors: Vec::new(),
                weights,
                scalars_sent: server_round_message_count(p, n),
                elapsed: start.elapsed().as_secs_f64(),
            },
            &reference,
        )?;
        info!("round {t}: distance error {}", record.distance_error);
        previous = Some(u);
    }
    finish(trace, &global)
}

/// Serverless protocol: each client merges with its graph neighbours only.
pub fn run_decentralized(
    clients: &mut [ClientState],
    graph: &TopologyGraph,
    config: &FederationConfig,
) -> Result<RunTrace> {
    let Setup {
        n,
        global,
        reference,
    } = setup(clients, config)?;
    let p = clients.len();
    if graph.node_count() != p {
        return Err(Error::InvalidArgument(format!(
            "graph has {} nodes but there are {p} clients",
            graph.node_count()
        )));
    }
    let mut rngs = Rngs::new(config.seed);
    let mut trace = RunTrace::new(config.rounds);
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for t in 0..config.rounds {
        let start = Instant::now();
        let mut vectors = Vec::with_capacity(p);
        let mut alphas = Vec::with_capacity(p);
        for (i, client) in clients.iter_mut().enumerate() {
            let init = match (&previous, config.warm_start) {
                (Some(us), true) => us[i].clone(),
                _ => random_unit_vector(&mut rngs.main, n),
            };
            let pair = train_client(client, &init, config, &mut rngs, t)?;
            vectors.push(pair.vector);
            alphas.push(pair.value);
        }
        let mut us = Vec::with_capacity(p);
        for i in 0..p {
            let mut members: Vec<usize> = graph.neighbors(i)?.to_vec();
            members.push(i);
            members.sort_unstable();
            let set: Vec<Vec<f64>> = members.iter().map(|&j| vectors[j].clone()).collect();
            let set_alphas: Vec<f64> = members.iter().map(|&j| alphas[j]).collect();
            let aligned = sign_align(&set, &vectors[i]);
            let raw =
                merge_by_mode(config.merge_mode, &aligned, &set_alphas).map_err(wrap(t, i))?;
            us.push(normalize(&raw).map_err(wrap(t, i))?);
        }
        if config.update_local_data {
            for (client, u) in clients.iter_mut().zip(&us) {
                apply_update(client, u, &config.mode, t)?;
            }
        }
        let consensus = normalize(&merge(&sign_align(&us, &us[0]), &vec![1.0 / p as f64; p])?)?;
        let record = trace.record_round(
            RoundObservation {
                federated_vector: consensus,
                client_vectors: us.clone(),
                weights: compute_weights(&alphas)?,
                scalars_sent: graph.round_message_count(n),
                elapsed: start.elapsed().as_secs_f64(),
            },
            &reference,
        )?;
        info!("round {t}: mean distance error {}", record.distance_error);
        previous = Some(us);
    }
    finish(trace, &global)
}
