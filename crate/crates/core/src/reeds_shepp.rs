//! Shortest bounded-curvature paths for a vehicle that can drive forward and
//! in reverse.
//!
//! Paths are words over arc (`L`, `R`) and straight (`S`) segments with signed
//! lengths (negative means reverse). The closed-form catalog enumerates every
//! candidate word shape: `CSC`, `C|C|C` (with its reversed variants), `CC|CC`,
//! `C|CC` / `CC|C` with a quarter-turn next to the straight, and the five-piece
//! `C|C S C|C`, each expanded through the time-flip, reflection and backwards
//! symmetries. Arc magnitudes never exceed a half turn on minimal words, which
//! is what the per-family validity gates encode.
//!
//! Every returned word is additionally verified by composing its segments
//! forward; a candidate that fails to land on the goal pose (to 1e-6 in
//! normalized units) is discarded before the minimum is taken. The solver is
//! exact in the obstacle-free plane, which makes it both an admissible search
//! heuristic and the terminal connection of the lattice planner.

use std::f64::consts::PI;

use crate::angle::wrap_angle;
use crate::hybrid_astar::{Direction, SearchPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegKind {
    Left,
    Straight,
    Right,
}

/// One path piece with a signed metric length (negative = reverse).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsSegment {
    pub kind: SegKind,
    pub length: f64,
}

/// A curvature-bounded connection between two poses.
#[derive(Debug, Clone, PartialEq)]
pub struct RsPath {
    pub segments: Vec<RsSegment>,
    /// Total traveled distance in meters (sum of unsigned segment lengths).
    pub length: f64,
    pub radius: f64,
}

const VALID_EPS: f64 = 1e-12;
const GOAL_EPS: f64 = 1e-6;

/// Wraps into [-pi, pi].
fn mod2pi(x: f64) -> f64 {
    let mut v = x % (2.0 * PI);
    if v < -PI {
        v += 2.0 * PI;
    } else if v > PI {
        v -= 2.0 * PI;
    }
    v
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    ((x * x + y * y).sqrt(), y.atan2(x))
}

fn acos_clamped(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

fn asin_clamped(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).asin()
}

// Base solvers in the normalized frame (start at the origin facing +x, unit
// turning radius). Each returns arc/straight parameters for one word shape;
// the caller applies the symmetry transforms.

/// `L+ S+ L+`
fn lp_sp_lp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u, t) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if t >= -VALID_EPS {
        let v = mod2pi(phi - t);
        if v >= -VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// `L+ S+ R+`
fn lp_sp_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u1, t1) = polar(x + phi.sin(), y - 1.0 - phi.cos());
    if u1 * u1 >= 4.0 {
        let u = (u1 * u1 - 4.0).sqrt();
        let theta = 2.0f64.atan2(u);
        let t = mod2pi(t1 + theta);
        let v = mod2pi(t - phi);
        if t >= -VALID_EPS && v >= -VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// `L+ R- L` (last arc sign free)
fn lp_rm_l(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (u1, theta) = polar(xi, eta);
    if u1 <= 4.0 {
        let u = -2.0 * asin_clamped(0.25 * u1);
        let t = mod2pi(theta + 0.5 * u + PI);
        let v = mod2pi(phi - t + u);
        if t >= -VALID_EPS && u <= VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// Shared angle bookkeeping of the four-arc words.
fn tau_omega(u: f64, v: f64, xi: f64, eta: f64, phi: f64) -> (f64, f64) {
    let delta = mod2pi(u - v);
    let a = u.sin() - delta.sin();
    let b = u.cos() - delta.cos() - 1.0;
    let t1 = (eta * a - xi * b).atan2(xi * a + eta * b);
    let t2 = 2.0 * (delta.cos() - v.cos() - u.cos()) + 3.0;
    let tau = if t2 < 0.0 { mod2pi(t1 + PI) } else { mod2pi(t1) };
    (tau, mod2pi(tau - u + v - phi))
}

/// `L+ R+(u) L-(u) R-`
fn lp_rup_lum_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = 0.25 * (2.0 + (xi * xi + eta * eta).sqrt());
    if rho <= 1.0 {
        let u = acos_clamped(rho);
        let (t, v) = tau_omega(u, -u, xi, eta, phi);
        if t >= -VALID_EPS && v <= VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// `L+ R-(u) L-(u) R+`
fn lp_rum_lum_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = (20.0 - xi * xi - eta * eta) / 16.0;
    if (0.0..=1.0).contains(&rho) {
        let u = -acos_clamped(rho);
        if u >= -0.5 * PI {
            let (t, v) = tau_omega(u, u, xi, eta, phi);
            if t >= -VALID_EPS && v >= -VALID_EPS {
                return Some((t, u, v));
            }
        }
    }
    None
}

/// `L+ R-(pi/2) S- L-`
fn lp_rm_sm_lm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (rho, theta) = polar(xi, eta);
    if rho >= 2.0 {
        let r = (rho * rho - 4.0).sqrt();
        let u = 2.0 - r;
        let t = mod2pi(theta + r.atan2(-2.0));
        let v = mod2pi(phi - 0.5 * PI - t);
        if t >= -VALID_EPS && u <= VALID_EPS && v <= VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// `L+ R-(pi/2) S- R-`
fn lp_rm_sm_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, theta) = polar(-eta, xi);
    if rho >= 2.0 {
        let t = theta;
        let u = 2.0 - rho;
        let v = mod2pi(t + 0.5 * PI - phi);
        if t >= -VALID_EPS && u <= VALID_EPS && v <= VALID_EPS {
            return Some((t, u, v));
        }
    }
    None
}

/// `L+ R-(pi/2) S- L-(pi/2) R+`
fn lp_rm_s_lm_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, _) = polar(xi, eta);
    if rho >= 2.0 {
        let u = 4.0 - (rho * rho - 4.0).sqrt();
        if u <= VALID_EPS {
            let t = mod2pi(((4.0 - u) * xi - 2.0 * eta).atan2(-2.0 * xi + (u - 4.0) * eta));
            let v = mod2pi(t - phi);
            if t >= -VALID_EPS && v >= -VALID_EPS {
                return Some((t, u, v));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    kinds: [SegKind; 5],
    lens: [f64; 5],
    n: usize,
    total: f64,
}

impl Candidate {
    fn new(kinds: &[SegKind], lens: &[f64]) -> Self {
        let mut k = [SegKind::Straight; 5];
        let mut l = [0.0; 5];
        k[..kinds.len()].copy_from_slice(kinds);
        l[..lens.len()].copy_from_slice(lens);
        Self { kinds: k, lens: l, n: kinds.len(), total: lens.iter().map(|x| x.abs()).sum() }
    }
}

/// Advances a pose along one segment in the normalized frame.
fn advance(pose: (f64, f64, f64), kind: SegKind, s: f64) -> (f64, f64, f64) {
    let (x, y, psi) = pose;
    match kind {
        SegKind::Straight => (x + s * psi.cos(), y + s * psi.sin(), psi),
        SegKind::Left => (x + (psi + s).sin() - psi.sin(), y - (psi + s).cos() + psi.cos(), psi + s),
        SegKind::Right => (x - (psi - s).sin() + psi.sin(), y + (psi - s).cos() - psi.cos(), psi - s),
    }
}

fn reaches_goal(c: &Candidate, x: f64, y: f64, phi: f64) -> bool {
    let mut pose = (0.0, 0.0, 0.0);
    for i in 0..c.n {
        pose = advance(pose, c.kinds[i], c.lens[i]);
    }
    (pose.0 - x).abs() <= GOAL_EPS
        && (pose.1 - y).abs() <= GOAL_EPS
        && wrap_angle(pose.2 - phi).abs() <= GOAL_EPS
}

/// All valid candidate words for the normalized goal `(x, y, phi)`.
fn candidates(x: f64, y: f64, phi: f64) -> Vec<Candidate> {
    use SegKind::{Left as L, Right as R, Straight as S};
    let mut out = Vec::with_capacity(44);
    let hp = 0.5 * PI;

    // Straight-and-turn words, all four symmetry images.
    if let Some((t, u, v)) = lp_sp_lp(x, y, phi) {
        out.push(Candidate::new(&[L, S, L], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_sp_lp(-x, y, -phi) {
        out.push(Candidate::new(&[L, S, L], &[-t, -u, -v]));
    }
    if let Some((t, u, v)) = lp_sp_lp(x, -y, -phi) {
        out.push(Candidate::new(&[R, S, R], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_sp_lp(-x, -y, phi) {
        out.push(Candidate::new(&[R, S, R], &[-t, -u, -v]));
    }
    if let Some((t, u, v)) = lp_sp_rp(x, y, phi) {
        out.push(Candidate::new(&[L, S, R], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_sp_rp(-x, y, -phi) {
        out.push(Candidate::new(&[L, S, R], &[-t, -u, -v]));
    }
    if let Some((t, u, v)) = lp_sp_rp(x, -y, -phi) {
        out.push(Candidate::new(&[R, S, L], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_sp_rp(-x, -y, phi) {
        out.push(Candidate::new(&[R, S, L], &[-t, -u, -v]));
    }

    // Three arcs, plus the same words solved from the reversed goal.
    let xb = x * phi.cos() + y * phi.sin();
    let yb = x * phi.sin() - y * phi.cos();
    if let Some((t, u, v)) = lp_rm_l(x, y, phi) {
        out.push(Candidate::new(&[L, R, L], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_l(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, L], &[-t, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_l(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, R], &[t, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_l(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, R], &[-t, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_l(xb, yb, phi) {
        out.push(Candidate::new(&[L, R, L], &[v, u, t]));
    }
    if let Some((t, u, v)) = lp_rm_l(-xb, yb, -phi) {
        out.push(Candidate::new(&[L, R, L], &[-v, -u, -t]));
    }
    if let Some((t, u, v)) = lp_rm_l(xb, -yb, -phi) {
        out.push(Candidate::new(&[R, L, R], &[v, u, t]));
    }
    if let Some((t, u, v)) = lp_rm_l(-xb, -yb, phi) {
        out.push(Candidate::new(&[R, L, R], &[-v, -u, -t]));
    }

    // Four arcs with equal-magnitude middle pair.
    if let Some((t, u, v)) = lp_rup_lum_rm(x, y, phi) {
        out.push(Candidate::new(&[L, R, L, R], &[t, u, -u, v]));
    }
    if let Some((t, u, v)) = lp_rup_lum_rm(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, L, R], &[-t, -u, u, -v]));
    }
    if let Some((t, u, v)) = lp_rup_lum_rm(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, R, L], &[t, u, -u, v]));
    }
    if let Some((t, u, v)) = lp_rup_lum_rm(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, R, L], &[-t, -u, u, -v]));
    }
    if let Some((t, u, v)) = lp_rum_lum_rp(x, y, phi) {
        out.push(Candidate::new(&[L, R, L, R], &[t, u, u, v]));
    }
    if let Some((t, u, v)) = lp_rum_lum_rp(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, L, R], &[-t, -u, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rum_lum_rp(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, R, L], &[t, u, u, v]));
    }
    if let Some((t, u, v)) = lp_rum_lum_rp(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, R, L], &[-t, -u, -u, -v]));
    }

    // Two arcs, a quarter turn and a straight; forward and backwards readings.
    if let Some((t, u, v)) = lp_rm_sm_lm(x, y, phi) {
        out.push(Candidate::new(&[L, R, S, L], &[t, -hp, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, S, L], &[-t, hp, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, S, R], &[t, -hp, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, S, R], &[-t, hp, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(x, y, phi) {
        out.push(Candidate::new(&[L, R, S, R], &[t, -hp, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, S, R], &[-t, hp, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, S, L], &[t, -hp, u, v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, S, L], &[-t, hp, -u, -v]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(xb, yb, phi) {
        out.push(Candidate::new(&[L, S, R, L], &[v, u, -hp, t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(-xb, yb, -phi) {
        out.push(Candidate::new(&[L, S, R, L], &[-v, -u, hp, -t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(xb, -yb, -phi) {
        out.push(Candidate::new(&[R, S, L, R], &[v, u, -hp, t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_lm(-xb, -yb, phi) {
        out.push(Candidate::new(&[R, S, L, R], &[-v, -u, hp, -t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(xb, yb, phi) {
        out.push(Candidate::new(&[R, S, R, L], &[v, u, -hp, t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(-xb, yb, -phi) {
        out.push(Candidate::new(&[R, S, R, L], &[-v, -u, hp, -t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(xb, -yb, -phi) {
        out.push(Candidate::new(&[L, S, L, R], &[v, u, -hp, t]));
    }
    if let Some((t, u, v)) = lp_rm_sm_rm(-xb, -yb, phi) {
        out.push(Candidate::new(&[L, S, L, R], &[-v, -u, hp, -t]));
    }

    // Five pieces: straight between two quarter turns.
    if let Some((t, u, v)) = lp_rm_s_lm_rp(x, y, phi) {
        out.push(Candidate::new(&[L, R, S, L, R], &[t, -hp, u, -hp, v]));
    }
    if let Some((t, u, v)) = lp_rm_s_lm_rp(-x, y, -phi) {
        out.push(Candidate::new(&[L, R, S, L, R], &[-t, hp, -u, hp, -v]));
    }
    if let Some((t, u, v)) = lp_rm_s_lm_rp(x, -y, -phi) {
        out.push(Candidate::new(&[R, L, S, R, L], &[t, -hp, u, -hp, v]));
    }
    if let Some((t, u, v)) = lp_rm_s_lm_rp(-x, -y, phi) {
        out.push(Candidate::new(&[R, L, S, R, L], &[-t, hp, -u, hp, -v]));
    }
    out
}

fn normalize_goal(from: &SearchPose, to: &SearchPose, radius: f64) -> (f64, f64, f64) {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let (s, c) = from.psi.sin_cos();
    ((c * dx + s * dy) / radius, (-s * dx + c * dy) / radius, wrap_angle(to.psi - from.psi))
}

fn best_candidate(x: f64, y: f64, phi: f64) -> Option<Candidate> {
    let mut cands = candidates(x, y, phi);
    // Shortest integration-verified word wins. Verification normally passes on
    // the first try; it exists to keep a formula regression from ever
    // returning a word that misses the goal.
    while !cands.is_empty() {
        let (idx, _) = cands
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total.total_cmp(&b.1.total))
            .expect("non-empty candidate set");
        let best = cands.swap_remove(idx);
        if reaches_goal(&best, x, y, phi) {
            return Some(best);
        }
    }
    None
}

/// Length in meters of the shortest curvature-bounded connection.
pub fn reeds_shepp_distance(from: &SearchPose, to: &SearchPose, radius: f64) -> f64 {
    debug_assert!(radius > 0.0);
    let (x, y, phi) = normalize_goal(from, to, radius);
    if x.abs() < 1e-12 && y.abs() < 1e-12 && phi.abs() < 1e-12 {
        return 0.0;
    }
    best_candidate(x, y, phi).map(|c| c.total * radius).unwrap_or(f64::INFINITY)
}

/// Shortest curvature-bounded path between two poses. An identical pair gives
/// an empty zero-length path.
pub fn reeds_shepp_connect(from: &SearchPose, to: &SearchPose, radius: f64) -> RsPath {
    debug_assert!(radius > 0.0);
    let (x, y, phi) = normalize_goal(from, to, radius);
    if x.abs() < 1e-12 && y.abs() < 1e-12 && phi.abs() < 1e-12 {
        return RsPath { segments: Vec::new(), length: 0.0, radius };
    }
    match best_candidate(x, y, phi) {
        Some(c) => {
            let segments = (0..c.n)
                .filter(|&i| c.lens[i].abs() > 1e-12)
                .map(|i| RsSegment { kind: c.kinds[i], length: c.lens[i] * radius })
                .collect();
            RsPath { segments, length: c.total * radius, radius }
        }
        None => RsPath { segments: Vec::new(), length: f64::INFINITY, radius },
    }
}

impl RsPath {
    pub fn is_valid(&self) -> bool {
        self.length.is_finite()
    }

    /// Word notation like `L+R-S+`, mostly for diagnostics.
    pub fn word(&self) -> String {
        self.segments
            .iter()
            .map(|seg| {
                let k = match seg.kind {
                    SegKind::Left => 'L',
                    SegKind::Straight => 'S',
                    SegKind::Right => 'R',
                };
                format!("{k}{}", if seg.length >= 0.0 { '+' } else { '-' })
            })
            .collect()
    }

    /// Poses along the path at roughly `step` arc spacing (each segment is cut
    /// into equal pieces no longer than `step`), paired with cumulative arc
    /// length. Starts with `from` at s = 0; the last entry is the exact goal.
    pub fn sample_with_s(&self, from: &SearchPose, step: f64) -> Vec<(SearchPose, f64)> {
        debug_assert!(step > 0.0);
        let first_dir = self
            .segments
            .first()
            .map(|seg| if seg.length >= 0.0 { Direction::Forward } else { Direction::Reverse })
            .unwrap_or(from.direction);
        let mut out = vec![(SearchPose { direction: first_dir, ..*from }, 0.0)];
        let mut pose = (from.x, from.y, from.psi);
        let mut s_total = 0.0;
        for seg in &self.segments {
            let dir = if seg.length >= 0.0 { Direction::Forward } else { Direction::Reverse };
            let n = ((seg.length.abs() / step).ceil() as usize).max(1);
            let start = pose;
            for k in 1..=n {
                let frac = k as f64 / n as f64;
                let s_seg = seg.length * frac; // signed arc along the segment
                let kind = seg.kind;
                let p = match kind {
                    SegKind::Straight => advance_world(start, 0.0, s_seg),
                    SegKind::Left => advance_world(start, 1.0 / self.radius, s_seg),
                    SegKind::Right => advance_world(start, -1.0 / self.radius, s_seg),
                };
                out.push((
                    SearchPose { x: p.0, y: p.1, psi: wrap_angle(p.2), direction: dir },
                    s_total + seg.length.abs() * frac,
                ));
            }
            pose = {
                let last = out.last().unwrap().0;
                (last.x, last.y, last.psi)
            };
            s_total += seg.length.abs();
        }
        out
    }
}

/// Advances a world pose by signed arc `s` along constant curvature `kappa`.
pub fn advance_world(pose: (f64, f64, f64), kappa: f64, s: f64) -> (f64, f64, f64) {
    let (x, y, psi) = pose;
    if kappa.abs() < 1e-12 {
        (x + s * psi.cos(), y + s * psi.sin(), psi)
    } else {
        let next_psi = psi + kappa * s;
        (x + (next_psi.sin() - psi.sin()) / kappa, y - (next_psi.cos() - psi.cos()) / kappa, next_psi)
    }
}
