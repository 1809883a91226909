//! Geometry, Rician channel realizations and the cascaded AP-IRS-user algebra.
//!
//! Conventions used throughout the crate:
//!
//! * `direct` row `k` is the 1xM row `g^H_{AU,k}`.
//! * `irs_user[l][k]` holds the N entries of the row `g^H_{IU,lk}`.
//! * `cascaded[k]` is the IxM stack whose block `l` is
//!   `diag(g^H_{IU,lk}) G_{AI,l}`.
//! * [`PhaseVector`] stores the entries `p_i = e^{j theta_i}` of the row
//!   `v^H`, so the aggregated channel of user `k` is `p^T G_k + g^H_{AU,k}`
//!   with no conjugation anywhere.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{db_to_linear, ConfigError, LinkParams, ScenarioConfig};
use crate::linalg::{cis, CMatrix, CVector, C64};

/// Linear power gain of a link plus a flag set when the distance was below
/// the 1 m reference and had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub gain: f64,
    pub clamped: bool,
}

/// `10^(-ref_db/10) * d^(-exponent)` with the distance clamped to >= 1 m.
pub fn path_loss(distance_m: f64, exponent: f64, ref_db: f64) -> PathLoss {
    let clamped = !(distance_m >= 1.0);
    let d = if clamped { 1.0 } else { distance_m };
    PathLoss {
        gain: db_to_linear(-ref_db) * d.powf(-exponent),
        clamped,
    }
}

/// IRS reflection coefficients `p_i = e^{j theta_i}`, angles kept in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: Vec<f64>,
}

pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta % (2.0 * PI);
    let t = if t < 0.0 { t + 2.0 * PI } else { t };
    // -tiny % 2pi + 2pi rounds to exactly 2pi
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

impl PhaseVector {
    pub fn from_angles(theta: impl IntoIterator<Item = f64>) -> Self {
        Self {
            theta: theta.into_iter().map(wrap_angle).collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            theta: alloc::vec![0.0; len],
        }
    }

    /// Uniform random phases in `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self::from_angles((0..len).map(|_| rng.random::<f64>() * 2.0 * PI))
    }

    /// Phases of arbitrary nonzero complex numbers; zero entries map to angle 0.
    pub fn from_complex(values: impl IntoIterator<Item = C64>) -> Self {
        Self::from_angles(values.into_iter().map(|z| if z == C64::new(0.0, 0.0) { 0.0 } else { z.arg() }))
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_angle(&mut self, i: usize, theta: f64) {
        self.theta[i] = wrap_angle(theta);
    }

    /// The entries of `v^H`.
    pub fn entries(&self) -> CVector {
        CVector::from_iterator(self.theta.len(), self.theta.iter().map(|&t| cis(t)))
    }

    /// Largest `| |p_i| - 1 |` over the materialized entries.
    pub fn max_modulus_deviation(&self) -> f64 {
        self.entries().iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Per-IRS components kept when a channel set is sampled from geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsLinks {
    /// `G_{AI,l}`, N x M each.
    pub ap_irs: Vec<CMatrix>,
    /// `irs_user[l][k]` = entries of `g^H_{IU,lk}`.
    pub irs_user: Vec<Vec<CVector>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// K x M, row k = `g^H_{AU,k}`.
    pub direct: CMatrix,
    /// K matrices of I x M.
    pub cascaded: Vec<CMatrix>,
    /// Component links, absent when the set was loaded from a dataset.
    pub links: Option<IrsLinks>,
    pub user_positions: Vec<[f64; 3]>,
    /// Number of links whose distance was clamped to the 1 m reference.
    pub clamped_links: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelShapeError {
    #[error("expected {expected} cascaded matrices, found {found}")]
    UserCount { expected: usize, found: usize },
    #[error("cascaded matrix {k} is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    CascadedShape {
        k: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("IRS link shapes are inconsistent")]
    IrsLinks,
}

/// `diag(g^H_{IU,lk}) G_{AI,l}` stacked over l.
pub fn stack_cascaded(ap_irs: &[CMatrix], irs_user_rows: &[&CVector]) -> CMatrix {
    let m = ap_irs.first().map_or(0, |g| g.ncols());
    let total: usize = ap_irs.iter().map(|g| g.nrows()).sum();
    let mut out = CMatrix::zeros(total, m);
    let mut offset = 0;
    for (g_ai, row) in ap_irs.iter().zip(irs_user_rows) {
        for n in 0..g_ai.nrows() {
            for c in 0..m {
                out[(offset + n, c)] = row[n] * g_ai[(n, c)];
            }
        }
        offset += g_ai.nrows();
    }
    out
}

impl ChannelSet {
    /// Builds the cascaded stacks from per-IRS links.
    pub fn from_links(direct: CMatrix, links: IrsLinks) -> Result<Self, ChannelShapeError> {
        let k = direct.nrows();
        let m = direct.ncols();
        if links.irs_user.len() != links.ap_irs.len()
            || links.ap_irs.iter().any(|g| g.ncols() != m)
            || links
                .irs_user
                .iter()
                .zip(&links.ap_irs)
                .any(|(rows, g)| rows.len() != k || rows.iter().any(|r| r.len() != g.nrows()))
        {
            return Err(ChannelShapeError::IrsLinks);
        }
        let cascaded = (0..k)
            .map(|user| {
                let rows: Vec<&CVector> = links.irs_user.iter().map(|per_irs| &per_irs[user]).collect();
                stack_cascaded(&links.ap_irs, &rows)
            })
            .collect();
        Ok(Self {
            direct,
            cascaded,
            links: Some(links),
            user_positions: Vec::new(),
            clamped_links: 0,
        })
    }

    /// Wraps already-stacked channels (the form stored in datasets).
    pub fn from_cascaded(direct: CMatrix, cascaded: Vec<CMatrix>) -> Result<Self, ChannelShapeError> {
        let k = direct.nrows();
        let m = direct.ncols();
        if cascaded.len() != k {
            return Err(ChannelShapeError::UserCount {
                expected: k,
                found: cascaded.len(),
            });
        }
        let rows = cascaded.first().map_or(0, |g| g.nrows());
        for (idx, g) in cascaded.iter().enumerate() {
            if g.nrows() != rows || g.ncols() != m {
                return Err(ChannelShapeError::CascadedShape {
                    k: idx,
                    rows: g.nrows(),
                    cols: g.ncols(),
                    want_rows: rows,
                    want_cols: m,
                });
            }
        }
        Ok(Self {
            direct,
            cascaded,
            links: None,
            user_positions: Vec::new(),
            clamped_links: 0,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.direct.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.direct.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.cascaded.first().map_or(0, |g| g.nrows())
    }

    /// `h^H_{AU,k} = v^H G_{AIU,k} + g^H_{AU,k}` as an M-vector.
    pub fn aggregate_channel(&self, v: &PhaseVector, k: usize) -> CVector {
        let p = v.entries();
        self.aggregate_with_entries(&p, k)
    }

    pub(crate) fn aggregate_with_entries(&self, p: &CVector, k: usize) -> CVector {
        let g = &self.cascaded[k];
        let m = self.num_aps();
        CVector::from_iterator(
            m,
            (0..m).map(|c| {
                let mut acc = self.direct[(k, c)];
                for i in 0..g.nrows() {
                    acc += p[i] * g[(i, c)];
                }
                acc
            }),
        )
    }

    /// All aggregated channels as a K x M matrix (row k = `h^H_{AU,k}`).
    pub fn effective(&self, v: &PhaseVector) -> CMatrix {
        let p = v.entries();
        let mut h = CMatrix::zeros(self.num_users(), self.num_aps());
        for k in 0..self.num_users() {
            h.set_row(k, &self.aggregate_with_entries(&p, k).transpose());
        }
        h
    }

    /// Largest relative mismatch between the stored stacks and a rebuild from
    /// the component links; `None` when the links are not retained.
    pub fn cascade_defect(&self) -> Option<f64> {
        let links = self.links.as_ref()?;
        let mut worst: f64 = 0.0;
        for (k, g) in self.cascaded.iter().enumerate() {
            let rows: Vec<&CVector> = links.irs_user.iter().map(|per_irs| &per_irs[k]).collect();
            let rebuilt = stack_cascaded(&links.ap_irs, &rows);
            let scale = rebuilt.norm().max(f64::MIN_POSITIVE);
            worst = worst.max((g - rebuilt).norm() / scale);
        }
        Some(worst)
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Response of an N-element half-wavelength ULA laid along the x axis toward
/// `target`: entries `e^{j pi n cos(phi)}` with `cos(phi)` the x direction cosine.
pub fn ula_response(array: &[f64; 3], target: &[f64; 3], len: usize) -> CVector {
    let d = distance(array, target);
    let cos_phi = if d > 0.0 { (target[0] - array[0]) / d } else { 0.0 };
    CVector::from_iterator(len, (0..len).map(|n| cis(PI * n as f64 * cos_phi)))
}

/// LoS and NLoS mixing weights `(sqrt(k/(1+k)), sqrt(1/(1+k)))`.
pub fn rician_weights(rician_db: f64) -> (f64, f64) {
    if rician_db == f64::INFINITY {
        return (1.0, 0.0);
    }
    let kappa = db_to_linear(rician_db);
    ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

struct LinkSampler<'a> {
    params: LinkParams,
    ref_db: f64,
    clamped: &'a mut usize,
}

impl LinkSampler<'_> {
    /// `sqrt(PL) (w_los * los + w_nlos * CN(0, I))`.
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, d: f64, los: &CVector) -> CVector {
        let pl = path_loss(d, self.params.pathloss_exp, self.ref_db);
        if pl.clamped {
            *self.clamped += 1;
        }
        let amp = pl.gain.sqrt();
        let (w_los, w_nlos) = rician_weights(self.params.rician_db);
        CVector::from_iterator(
            los.len(),
            los.iter().map(|l| {
                let nlos = complex_normal(rng);
                (*l * w_los + nlos * w_nlos) * amp
            }),
        )
    }
}

/// Uniform point in the configured user disk.
fn drop_user<R: Rng + ?Sized>(rng: &mut R, center: [f64; 2], radius: f64, height: f64) -> [f64; 3] {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [center[0] + r * phi.cos(), center[1] + r * phi.sin(), height]
}

/// Draws user positions and every link of one system realization.
///
/// The draw order is fixed (disk center, users, AP-user links, then per IRS the
/// AP-IRS matrix followed by the IRS-user rows), so a seed identifies the
/// realization completely.
pub fn sample_scenario(config: &ScenarioConfig, seed: u64) -> Result<ChannelSet, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = &config.user_area;
    let t: f64 = rng.random();
    let center = [
        area.start[0] + t * (area.end[0] - area.start[0]),
        area.start[1] + t * (area.end[1] - area.start[1]),
    ];
    let users: Vec<[f64; 3]> = (0..config.num_users)
        .map(|_| drop_user(&mut rng, center, area.radius, area.height))
        .collect();

    let mut clamped = 0usize;
    let scalar_los = CVector::from_element(1, C64::new(1.0, 0.0));

    let mut direct = CMatrix::zeros(config.num_users, config.num_aps);
    {
        let mut sampler = LinkSampler {
            params: config.ap_user,
            ref_db: config.pathloss_ref_db,
            clamped: &mut clamped,
        };
        for (k, user) in users.iter().enumerate() {
            for (m, ap) in config.ap_positions.iter().enumerate() {
                direct[(k, m)] = sampler.draw(&mut rng, distance(ap, user), &scalar_los)[0];
            }
        }
    }

    let n = config.elements_per_irs;
    let mut ap_irs = Vec::with_capacity(config.num_irs);
    let mut irs_user = Vec::with_capacity(config.num_irs);
    for irs in &config.irs_positions {
        let mut g_ai = CMatrix::zeros(n, config.num_aps);
        let mut sampler = LinkSampler {
            params: config.ap_irs,
            ref_db: config.pathloss_ref_db,
            clamped: &mut clamped,
        };
        for (m, ap) in config.ap_positions.iter().enumerate() {
            let los = ula_response(irs, ap, n);
            g_ai.set_column(m, &sampler.draw(&mut rng, distance(ap, irs), &los));
        }
        ap_irs.push(g_ai);

        let mut sampler = LinkSampler {
            params: config.irs_user,
            ref_db: config.pathloss_ref_db,
            clamped: &mut clamped,
        };
        let rows: Vec<CVector> = users
            .iter()
            .map(|user| {
                let los = ula_response(irs, user, n).map(|z| z.conj());
                sampler.draw(&mut rng, distance(irs, user), &los)
            })
            .collect();
        irs_user.push(rows);
    }

    let mut set = ChannelSet::from_links(direct, IrsLinks { ap_irs, irs_user })
        .expect("shapes follow from a validated config");
    set.user_positions = users;
    set.clamped_links = clamped;
    Ok(set)
}
