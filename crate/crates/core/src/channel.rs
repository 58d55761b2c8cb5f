//! Scene geometry and Rician-faded BS–RIS / RIS–user channels.
//!
//! Each link is `√(ρ₀/d^α)·(√(κ/(1+κ))·LOS + √(1/(1+κ))·NLOS)`. The LOS part
//! is the outer product of half-wavelength ULA steering vectors (BS array
//! along x, RIS array along y) with angles taken from the geometry, so every
//! entry has unit modulus. NLOS entries are i.i.d. `CN(0, 1)`. Direct
//! BS–user links do not exist.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use ris_conic::{CMat, CVec, Complex64};

use crate::error::{Error, Result};
use crate::model::{Position, SystemConfig};
use crate::seeds::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS–RIS matrix, `N × Nt`.
    pub bs_ris: CMat,
    /// RIS–user vectors, length `N` each.
    pub ris_user: Vec<CVec>,
    pub user_pos: Vec<Position>,
    pub bs_ris_distance: f64,
    pub ris_user_distance: Vec<f64>,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.ris_user.len()
    }

    pub fn elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.bs_ris.ncols()
    }

    /// Builds a realization from explicit matrices; distances are set to 1.
    pub fn from_parts(bs_ris: CMat, ris_user: Vec<CVec>) -> Result<Self> {
        let n = bs_ris.nrows();
        if ris_user.iter().any(|f| f.len() != n) {
            return Err(Error::Dimension("RIS–user vectors must have one entry per RIS element".into()));
        }
        let k = ris_user.len();
        Ok(Self {
            bs_ris,
            ris_user,
            user_pos: vec![Position([0.0; 3]); k],
            bs_ris_distance: 1.0,
            ris_user_distance: vec![1.0; k],
        })
    }

    /// Text dump: a header line per block followed by `re,im` entries.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "bs_ris {} {} {:e}", self.elements(), self.antennas(), self.bs_ris_distance);
        for i in 0..self.elements() {
            let row: Vec<String> = self.bs_ris.row(i).iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        for (k, f) in self.ris_user.iter().enumerate() {
            let p = self.user_pos[k].0;
            let _ = writeln!(out, "user {k} {:e} {:e} {:e} {:e}", p[0], p[1], p[2], self.ris_user_distance[k]);
            let row: Vec<String> = f.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Dimension(format!("channel dump: {m}"));
        let parse_row = |line: &str| -> Result<Vec<Complex64>> {
            line.split_whitespace()
                .map(|tok| {
                    let (re, im) = tok.split_once(',').ok_or_else(|| bad("entry"))?;
                    Ok(Complex64::new(re.parse().map_err(|_| bad("re"))?, im.parse().map_err(|_| bad("im"))?))
                })
                .collect()
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if head.len() != 4 || head[0] != "bs_ris" {
            return Err(bad("header"));
        }
        let n: usize = head[1].parse().map_err(|_| bad("N"))?;
        let nt: usize = head[2].parse().map_err(|_| bad("Nt"))?;
        let d0: f64 = head[3].parse().map_err(|_| bad("d0"))?;
        let mut bs_ris = CMat::zeros(n, nt);
        for i in 0..n {
            let row = parse_row(lines.next().ok_or_else(|| bad("truncated"))?)?;
            if row.len() != nt {
                return Err(bad("row length"));
            }
            for (j, z) in row.into_iter().enumerate() {
                bs_ris[(i, j)] = z;
            }
        }
        let (mut ris_user, mut user_pos, mut dist) = (Vec::new(), Vec::new(), Vec::new());
        while let Some(line) = lines.next() {
            let parts: Vec<f64> = line
                .split_whitespace()
                .skip(2)
                .map(|t| t.parse().map_err(|_| bad("user line")))
                .collect::<Result<_>>()?;
            if parts.len() != 4 {
                return Err(bad("user line"));
            }
            user_pos.push(Position([parts[0], parts[1], parts[2]]));
            dist.push(parts[3]);
            let f = parse_row(lines.next().ok_or_else(|| bad("truncated"))?)?;
            if f.len() != n {
                return Err(bad("user vector length"));
            }
            ris_user.push(CVec::from_vec(f));
        }
        Ok(Self { bs_ris, ris_user, user_pos, bs_ris_distance: d0, ris_user_distance: dist })
    }
}

/// Users drawn uniformly from the configured rectangle, in user order from a
/// single placement stream.
pub fn place_users(cfg: &SystemConfig, root: u64) -> Result<Vec<Position>> {
    let r = &cfg.user_region;
    if !(r.x[0] <= r.x[1] && r.y[0] <= r.y[1]) || r.x.iter().chain(&r.y).any(|v| !v.is_finite()) {
        return Err(Error::Geometry("user region bounds must be finite and ordered".into()));
    }
    let mut rng = stream(root, Purpose::Placement, 0);
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    Ok((0..cfg.users)
        .map(|_| {
            let x = uniform(&mut rng, r.x[0], r.x[1]);
            let y = uniform(&mut rng, r.y[0], r.y[1]);
            Position([x, y, r.z])
        })
        .collect())
}

/// Power-domain path gain `ρ₀ / d^α`.
pub fn path_gain(distance: f64, alpha: f64, ref_gain: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Geometry(format!("distance must be positive, got {distance}")));
    }
    Ok(ref_gain / distance.powf(alpha))
}

/// LOS and NLOS amplitude weights for Rician factor `kappa`.
pub fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        return (1.0, 0.0);
    }
    ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
}

/// Half-wavelength ULA response `e^{jπ n cos ψ}` for `cos ψ = axis · dir`.
fn steering(len: usize, cos_angle: f64) -> CVec {
    CVec::from_fn(len, |n, _| Complex64::from_polar(1.0, PI * n as f64 * cos_angle))
}

fn direction_cosine(from: &Position, to: &Position, axis: usize) -> f64 {
    let d = from.distance(to);
    if d == 0.0 {
        0.0
    } else {
        (to.0[axis] - from.0[axis]) / d
    }
}

fn cn01<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

const BS_AXIS: usize = 0;
const RIS_AXIS: usize = 1;

/// Draws placement and channels from `cfg.seed`.
pub fn realize_channels(cfg: &SystemConfig) -> Result<ChannelRealization> {
    let users = place_users(cfg, cfg.seed)?;
    realize_at(cfg, users, cfg.seed)
}

/// Draws channels for given user positions. Row `n` of the BS–RIS matrix and
/// the vector of user `k` come from their own streams, so realizations for
/// smaller `N`, `Nt` or `K` are prefixes of larger ones under the same root.
pub fn realize_at(cfg: &SystemConfig, user_pos: Vec<Position>, root: u64) -> Result<ChannelRealization> {
    let (n, nt) = (cfg.ris_elements, cfg.bs_antennas);
    let d0 = cfg.bs_pos.distance(&cfg.ris_pos);
    let amp0 = path_gain(d0, cfg.alpha_bs_ris, cfg.ref_gain)?.sqrt();
    let (los0, nlos0) = rician_weights(cfg.rician_bs_ris);
    let ris_arrival = steering(n, direction_cosine(&cfg.ris_pos, &cfg.bs_pos, RIS_AXIS));
    let bs_departure = steering(nt, direction_cosine(&cfg.bs_pos, &cfg.ris_pos, BS_AXIS));
    let mut bs_ris = CMat::zeros(n, nt);
    for i in 0..n {
        let mut rng = stream(root, Purpose::BsRisRow, i as u64);
        for j in 0..nt {
            let los = ris_arrival[i] * bs_departure[j].conj();
            bs_ris[(i, j)] = (los * los0 + cn01(&mut rng) * nlos0) * amp0;
        }
    }
    let (los_u, nlos_u) = rician_weights(cfg.rician_ris_user);
    let mut ris_user = Vec::with_capacity(user_pos.len());
    let mut dist = Vec::with_capacity(user_pos.len());
    for (k, pos) in user_pos.iter().enumerate() {
        let d = cfg.ris_pos.distance(pos);
        let amp = path_gain(d, cfg.alpha_ris_user, cfg.ref_gain)?.sqrt();
        let los = steering(n, direction_cosine(&cfg.ris_pos, pos, RIS_AXIS));
        let mut rng = stream(root, Purpose::RisUser, k as u64);
        ris_user.push(CVec::from_fn(n, |i, _| (los[i] * los_u + cn01(&mut rng) * nlos_u) * amp));
        dist.push(d);
    }
    Ok(ChannelRealization { bs_ris, ris_user, user_pos, bs_ris_distance: d0, ris_user_distance: dist })
}
