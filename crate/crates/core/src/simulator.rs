//! User simulator built from a non-negative factorization of the utility
//! matrix: user sampling, rating simulation and affinity drift.

use std::io::{Read, Write};
use std::path::Path;

use log::{debug, info};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{MovieDoc, UserProfile, UtilityMatrix};
use crate::linalg::{gemm, Op};

pub const MAX_RATING: f64 = 5.0;
const FACTOR_MAGIC: &[u8; 5] = b"DRBF1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("utility matrix has no observed ratings")]
    EmptyMatrix,
    #[error("invalid factorization options: {0}")]
    InvalidOptions(&'static str),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("user pool is empty")]
    EmptyPool,
    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),
    #[error("bad factorization file: {0}")]
    BadFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfOptions {
    pub components: usize,
    pub max_iters: usize,
    /// Stop once the relative drop of the reconstruction error falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self {
            components: 55,
            max_iters: 200,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// Non-negative factors `W` (users x k) and `H` (k x movies), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationModel {
    n_users: usize,
    n_movies: usize,
    k: usize,
    global_mean: f64,
    w: Vec<f64>,
    h: Vec<f64>,
    /// `H` transposed, so a movie embedding is contiguous.
    h_cols: Vec<f64>,
}

impl FactorizationModel {
    pub fn new(n_users: usize, n_movies: usize, k: usize, global_mean: f64, w: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if w.len() != n_users * k || h.len() != k * n_movies {
            return Err(SimError::BadFile("factor shapes do not match header".into()));
        }
        if w.iter().chain(&h).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(SimError::BadFile("factors must be finite and nonnegative".into()));
        }
        let mut h_cols = vec![0.0; h.len()];
        for r in 0..k {
            for c in 0..n_movies {
                h_cols[c * k + r] = h[r * n_movies + c];
            }
        }
        Ok(Self {
            n_users,
            n_movies,
            k,
            global_mean,
            w,
            h,
            h_cols,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_movies(&self) -> usize {
        self.n_movies
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn user_row(&self, user_index: usize) -> &[f64] {
        &self.w[user_index * self.k..(user_index + 1) * self.k]
    }

    pub fn movie_column(&self, movie_index: usize) -> &[f64] {
        &self.h_cols[movie_index * self.k..(movie_index + 1) * self.k]
    }

    /// Root mean squared error of the clipped predictions on observed cells.
    pub fn observed_rmse(&self, u: &UtilityMatrix) -> f64 {
        if u.is_empty() {
            return 0.0;
        }
        let sse: f64 = u
            .entries()
            .iter()
            .map(|&(ui, mi, r)| {
                let p = clip_rating(dot(self.user_row(ui as usize), self.movie_column(mi as usize)));
                (p - r as f64).powi(2)
            })
            .sum();
        (sse / u.len() as f64).sqrt()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(FACTOR_MAGIC)?;
        for v in [self.n_users as u64, self.n_movies as u64, self.k as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.global_mean.to_le_bytes())?;
        for x in self.w.iter().chain(&self.h) {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic)?;
        if &magic != FACTOR_MAGIC {
            return Err(SimError::BadFile("wrong magic".into()));
        }
        let mut u64buf = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            input.read_exact(&mut u64buf)?;
            *d = usize::try_from(u64::from_le_bytes(u64buf))
                .map_err(|_| SimError::BadFile("dimension overflow".into()))?;
        }
        let [m, n, k] = dims;
        input.read_exact(&mut u64buf)?;
        let global_mean = f64::from_le_bytes(u64buf);
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            input.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let w = read_vec(m * k)?;
        let h = read_vec(k * n)?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(SimError::BadFile("trailing bytes".into()));
        }
        Self::new(m, n, k, global_mean, w, h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Result of [`factorize`]: the model plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub model: FactorizationModel,
    /// Frobenius reconstruction error of the filled matrix, starting with
    /// the initial factors.
    pub errors: Vec<f64>,
    pub converged: bool,
}

impl Factorization {
    pub fn iterations(&self) -> usize {
        self.errors.len() - 1
    }
}

/// Mean-filled dense copy of `u`.
pub fn filled_matrix(u: &UtilityMatrix) -> Result<(Vec<f64>, f64)> {
    let mean = u.global_mean().ok_or(SimError::EmptyMatrix)?;
    let mut v = vec![mean; u.n_users * u.n_movies];
    for &(ui, mi, r) in u.entries() {
        v[ui as usize * u.n_movies + mi as usize] = r as f64;
    }
    Ok((v, mean))
}

/// Seeded `uniform(0.1, 1.1)` starting factors, `W` drawn before `H`.
pub fn initial_factors(m: usize, n: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..m * k).map(|_| rng.random_range(0.1..1.1)).collect();
    let h = (0..k * n).map(|_| rng.random_range(0.1..1.1)).collect();
    (w, h)
}

/// Mean-fills the utility matrix and factorizes it with multiplicative
/// updates minimizing the Frobenius error. Hitting `max_iters` is not an
/// error; the last (best) factors are returned.
pub fn factorize(u: &UtilityMatrix, opts: &NmfOptions) -> Result<Factorization> {
    if opts.components == 0 {
        return Err(SimError::InvalidOptions("k must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(SimError::InvalidOptions("tol must be positive"));
    }
    let (v, mean) = filled_matrix(u)?;
    let (m, n, k) = (u.n_users, u.n_movies, opts.components);
    let (mut w, mut h) = initial_factors(m, n, k, opts.seed);
    let v_sq: f64 = v.iter().map(|x| x * x).sum();

    let mut wtv = vec![0.0; k * n];
    let mut wtw = vec![0.0; k * k];
    let mut wtwh = vec![0.0; k * n];
    let mut vht = vec![0.0; m * k];
    let mut hht = vec![0.0; k * k];
    let mut whht = vec![0.0; m * k];

    // ||V - WH||^2 = ||V||^2 - 2<W, V H^T> + <W^T W, H H^T>
    let sq_error = |w: &[f64], vht: &[f64], wtw: &[f64], hht: &[f64]| -> f64 {
        let cross: f64 = w.iter().zip(vht).map(|(a, b)| a * b).sum();
        let quad: f64 = wtw.iter().zip(hht).map(|(a, b)| a * b).sum();
        (v_sq - 2.0 * cross + quad).max(0.0).sqrt()
    };

    gemm(m, n, k, 1.0, &v, Op::N, &h, Op::T, 0.0, &mut vht);
    gemm(k, m, k, 1.0, &w, Op::T, &w, Op::N, 0.0, &mut wtw);
    gemm(k, n, k, 1.0, &h, Op::N, &h, Op::T, 0.0, &mut hht);
    let mut errors = vec![sq_error(&w, &vht, &wtw, &hht)];
    let mut converged = false;

    for it in 0..opts.max_iters {
        // H <- H * (W^T V) / (W^T W H)
        gemm(k, m, n, 1.0, &w, Op::T, &v, Op::N, 0.0, &mut wtv);
        gemm(k, k, n, 1.0, &wtw, Op::N, &h, Op::N, 0.0, &mut wtwh);
        multiplicative(&mut h, &wtv, &wtwh);

        // W <- W * (V H^T) / (W H H^T)
        gemm(m, n, k, 1.0, &v, Op::N, &h, Op::T, 0.0, &mut vht);
        gemm(k, n, k, 1.0, &h, Op::N, &h, Op::T, 0.0, &mut hht);
        gemm(m, k, k, 1.0, &w, Op::N, &hht, Op::N, 0.0, &mut whht);
        multiplicative(&mut w, &vht, &whht);

        gemm(k, m, k, 1.0, &w, Op::T, &w, Op::N, 0.0, &mut wtw);
        let err = sq_error(&w, &vht, &wtw, &hht);
        let prev = *errors.last().unwrap();
        errors.push(err);
        debug!("nmf iteration {} error {err:.6}", it + 1);
        if err <= f64::EPSILON * v_sq.sqrt() || (prev - err) / prev < opts.tol {
            converged = true;
            break;
        }
    }
    let model = FactorizationModel::new(m, n, k, mean, w, h)?;
    info!(
        "factorized {}x{} (k={}) in {} iterations, final error {:.4}, observed RMSE {:.4}",
        m,
        n,
        k,
        errors.len() - 1,
        errors.last().unwrap(),
        model.observed_rmse(u)
    );
    Ok(Factorization {
        model,
        errors,
        converged,
    })
}

fn multiplicative(x: &mut [f64], num: &[f64], den: &[f64]) {
    for ((x, &a), &b) in x.iter_mut().zip(num).zip(den) {
        *x *= a / b.max(f64::MIN_POSITIVE);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn clip_rating(x: f64) -> f64 {
    x.clamp(0.0, MAX_RATING)
}

/// Simulated rating: `embedding . H[:, movie]`, clipped to `[0, 5]`.
pub fn predict_rating(model: &FactorizationModel, embedding: &[f64], movie_index: usize) -> Result<f64> {
    if movie_index >= model.n_movies {
        return Err(SimError::IndexOutOfRange {
            index: movie_index,
            len: model.n_movies,
        });
    }
    Ok(clip_rating(dot(embedding, model.movie_column(movie_index))))
}

/// Per-episode simulated user. `embedding` starts as a copy of the user's
/// `W` row and drifts; `W` itself is never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct SimUserState {
    pub user_index: usize,
    pub embedding: Vec<f64>,
    /// Upper bound for every embedding entry: twice the row's original maximum.
    pub embedding_cap: f64,
    pub profile: UserProfile,
}

/// Scales the embedding by `1 + drift * rating / 5`, capped at the state's
/// `embedding_cap`.
pub fn transition_user(state: &SimUserState, chosen_rating: f64, drift: f64) -> SimUserState {
    debug_assert!(drift >= 0.0);
    let factor = 1.0 + drift * clip_rating(chosen_rating) / MAX_RATING;
    let cap = state.embedding_cap;
    SimUserState {
        embedding: state.embedding.iter().map(|&e| (e * factor).min(cap)).collect(),
        ..state.clone()
    }
}

/// Immutable simulation assets shared by every environment instance.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: FactorizationModel,
    users: Vec<UserProfile>,
    movies: Vec<MovieDoc>,
}

impl Simulator {
    /// `users` and `movies` must be in dense-index order (ascending raw id).
    pub fn new(model: FactorizationModel, users: Vec<UserProfile>, movies: Vec<MovieDoc>) -> Result<Self> {
        if users.len() != model.n_users {
            return Err(SimError::CatalogMismatch(format!(
                "{} user profiles for {} factor rows",
                users.len(),
                model.n_users
            )));
        }
        if movies.len() != model.n_movies {
            return Err(SimError::CatalogMismatch(format!(
                "{} movies for {} factor columns",
                movies.len(),
                model.n_movies
            )));
        }
        Ok(Self { model, users, movies })
    }

    pub fn model(&self) -> &FactorizationModel {
        &self.model
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn movies(&self) -> &[MovieDoc] {
        &self.movies
    }

    pub fn n_movies(&self) -> usize {
        self.model.n_movies
    }

    pub fn user_state(&self, user_index: usize) -> Result<SimUserState> {
        if user_index >= self.users.len() {
            return Err(SimError::IndexOutOfRange {
                index: user_index,
                len: self.users.len(),
            });
        }
        let row = self.model.user_row(user_index).to_vec();
        let max = row.iter().copied().fold(0.0, f64::max);
        Ok(SimUserState {
            user_index,
            embedding: row,
            embedding_cap: 2.0 * max,
            profile: self.users[user_index].clone(),
        })
    }

    /// Draws a user uniformly (with replacement across calls).
    pub fn sample_user<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimUserState> {
        if self.users.is_empty() {
            return Err(SimError::EmptyPool);
        }
        let idx = rng.random_range(0..self.users.len());
        self.user_state(idx)
    }

    pub fn predict(&self, state: &SimUserState, movie_index: usize) -> Result<f64> {
        predict_rating(&self.model, &state.embedding, movie_index)
    }
}
