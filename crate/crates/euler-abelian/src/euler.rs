//! Recursive factorized coordinates on SU(N) and SO(N), their inverses, and
//! the diagonal-shift identities the factorization satisfies.
//!
//! Angle storage is flat, one array per angle family. The phi and psi arrays
//! hold per-level blocks in descending level order (level N first, block size
//! level-1), matching the recursion "strip the top level, recurse on the
//! rest". The omega array is ascending: omega[j-1] belongs to level j+1.

use crate::generators::{det, omega_phase, phase3, plane_rotation, unitarity_defect, CMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

const TAU: f64 = 2.0 * PI;

/// Tie-break tolerance in the inverse eliminations.
const TIE_TOL: f64 = 1e-12;

/// How far from the group a matrix may be and still be inverted.
const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Su,
    So,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Su => "su",
            Group::So => "so",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "su" => Some(Group::Su),
            "so" => Some(Group::So),
            _ => None,
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EulerError {
    #[error("rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error("angle array lengths {got:?} do not match {group}({n}) layout {want:?}")]
    WrongLengths {
        group: Group,
        n: usize,
        got: (usize, usize, usize),
        want: (usize, usize, usize),
    },
    #[error("matrix is {defect:.2e} away from {group}({n})")]
    NotInGroup { group: Group, n: usize, defect: f64 },
    #[error("matrix size {got} does not match rank {want}")]
    WrongMatrixSize { got: usize, want: usize },
    #[error("unsupported shift kind {0:?}")]
    UnsupportedKind(String),
    #[error("shift kind {kind} requires rank {min} or higher, got {n}")]
    ShiftRank {
        kind: &'static str,
        n: usize,
        min: usize,
    },
    #[error("diagonal index {index} out of range 2..={rank}")]
    DiagonalIndex { rank: usize, index: usize },
    #[error("shift identities apply to the su coordinates only")]
    ShiftGroup,
}

/// (phi, psi, omega) array lengths for the given group and rank.
pub fn angle_counts(group: Group, n: usize) -> (usize, usize, usize) {
    let pairs = n * (n - 1) / 2;
    match group {
        Group::Su => (pairs, pairs, n - 1),
        Group::So => (pairs, 0, 0),
    }
}

/// Flat offset of the level-`level` block in the phi/psi arrays.
pub fn level_offset(n: usize, level: usize) -> usize {
    (n - 1 + level) * (n - level) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub group: Group,
    pub n: usize,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordKind {
    Phi,
    Psi,
    Omega,
}

impl std::fmt::Display for CoordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoordKind::Phi => "phi",
            CoordKind::Psi => "psi",
            CoordKind::Omega => "omega",
        })
    }
}

/// How a coordinate enters the abelianized picture: circle coordinates map to
/// torus variables (with a winding divisor), compact ones to [-1,1]-type
/// variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordRole {
    Circle { divisor: u64 },
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSpec {
    pub kind: CoordKind,
    /// Flat index within its own array.
    pub index: usize,
    /// Recursion level this angle belongs to (2..=n).
    pub level: usize,
    /// 0-based position within the level block.
    pub pos: usize,
    pub lo: f64,
    pub hi: f64,
    pub role: CoordRole,
}

impl CoordinateSpec {
    pub fn leading(&self) -> bool {
        self.kind == CoordKind::Phi && self.pos == 0
    }
}

/// Range and role descriptors for every coordinate, phi block first (flat
/// order), then psi, then omega.
pub fn coordinate_specs(group: Group, n: usize) -> Vec<CoordinateSpec> {
    let mut out = Vec::new();
    for level in (2..=n).rev() {
        let off = level_offset(n, level);
        for pos in 0..level - 1 {
            let (lo, hi, role) = match (group, pos) {
                (Group::Su, 0) => (0.0, PI, CoordRole::Circle { divisor: 2 }),
                (Group::Su, _) => (0.0, TAU, CoordRole::Circle { divisor: 1 }),
                (Group::So, 0) => (0.0, TAU, CoordRole::Circle { divisor: 1 }),
                (Group::So, _) => (0.0, PI, CoordRole::Compact),
            };
            out.push(CoordinateSpec {
                kind: CoordKind::Phi,
                index: off + pos,
                level,
                pos,
                lo,
                hi,
                role,
            });
        }
    }
    if group == Group::Su {
        for level in (2..=n).rev() {
            let off = level_offset(n, level);
            for pos in 0..level - 1 {
                out.push(CoordinateSpec {
                    kind: CoordKind::Psi,
                    index: off + pos,
                    level,
                    pos,
                    lo: 0.0,
                    hi: FRAC_PI_2,
                    role: CoordRole::Compact,
                });
            }
        }
        for j in 1..n {
            out.push(CoordinateSpec {
                kind: CoordKind::Omega,
                index: j - 1,
                level: j + 1,
                pos: 0,
                lo: 0.0,
                hi: TAU / j as f64,
                role: CoordRole::Circle { divisor: j as u64 },
            });
        }
    }
    out
}

impl EulerAngles {
    pub fn new(
        group: Group,
        n: usize,
        phi: Vec<f64>,
        psi: Vec<f64>,
        omega: Vec<f64>,
    ) -> Result<Self, EulerError> {
        if n < 2 {
            return Err(EulerError::RankTooSmall(n));
        }
        let want = angle_counts(group, n);
        let got = (phi.len(), psi.len(), omega.len());
        if got != want {
            return Err(EulerError::WrongLengths { group, n, got, want });
        }
        Ok(Self {
            group,
            n,
            phi,
            psi,
            omega,
        })
    }

    pub fn zeros(group: Group, n: usize) -> Result<Self, EulerError> {
        let (np, ns, no) = angle_counts(group, n);
        Self::new(group, n, vec![0.0; np], vec![0.0; ns], vec![0.0; no])
    }

    pub fn coordinates(&self) -> Vec<CoordinateSpec> {
        coordinate_specs(self.group, self.n)
    }

    fn value(&self, spec: &CoordinateSpec) -> f64 {
        match spec.kind {
            CoordKind::Phi => self.phi[spec.index],
            CoordKind::Psi => self.psi[spec.index],
            CoordKind::Omega => self.omega[spec.index],
        }
    }

    /// Out-of-range coordinates produce warnings, never rejection: the
    /// forward map is defined for all real angles.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for spec in self.coordinates() {
            let v = self.value(&spec);
            if v < spec.lo - 1e-12 || v > spec.hi + 1e-12 {
                out.push(format!(
                    "{}[{}] = {:.6} outside [{:.6}, {:.6}] (level {})",
                    spec.kind, spec.index, v, spec.lo, spec.hi, spec.level
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("angle serialization cannot fail")
    }

    pub fn from_json(v: &Value) -> Result<Self, EulerError> {
        let raw: EulerAngles = serde_json::from_value(v.clone())
            .map_err(|_| EulerError::RankTooSmall(0))?;
        Self::new(raw.group, raw.n, raw.phi, raw.psi, raw.omega)
    }
}

fn embed_upper(inner: &CMatrix, n: usize) -> CMatrix {
    let mut m = CMatrix::identity(n, n);
    let k = inner.nrows();
    m.view_mut((0, 0), (k, k)).copy_from(inner);
    m
}

fn su_forward_raw(n: usize, phi: &[f64], psi: &[f64], omega: &[f64]) -> CMatrix {
    if n == 1 {
        return CMatrix::identity(1, 1);
    }
    let mut m = CMatrix::identity(n, n);
    for k in 2..=n {
        m = m * phase3(n, phi[k - 2]) * plane_rotation(n, 0, k - 1, psi[k - 2]);
    }
    let inner = su_forward_raw(n - 1, &phi[n - 1..], &psi[n - 1..], &omega[..n - 2]);
    m * embed_upper(&inner, n) * omega_phase(n, omega[n - 2])
}

fn so_forward_raw(n: usize, phi: &[f64]) -> CMatrix {
    if n == 1 {
        return CMatrix::identity(1, 1);
    }
    let mut g = CMatrix::identity(n, n);
    for k in 1..n {
        g = g * plane_rotation(n, k - 1, k, phi[k - 1]);
    }
    g * embed_upper(&so_forward_raw(n - 1, &phi[n - 1..]), n)
}

/// The factorized coordinate map.
pub fn forward(a: &EulerAngles) -> CMatrix {
    match a.group {
        Group::Su => su_forward_raw(a.n, &a.phi, &a.psi, &a.omega),
        Group::So => so_forward_raw(a.n, &a.phi),
    }
}

pub(crate) fn membership_defect(group: Group, m: &CMatrix) -> f64 {
    let mut defect = unitarity_defect(m);
    defect = defect.max((det(m) - Complex64::new(1.0, 0.0)).norm());
    if group == Group::So {
        let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        defect = defect.max(imag);
    }
    defect
}

fn su_inverse_raw(n: usize, m: &CMatrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    let mut omega_rev = Vec::new();
    let mut v = m.clone();
    for r in (2..=n).rev() {
        for k in 1..r {
            let (f, s) = if k <= r - 2 {
                let a = v[(0, r - 1)];
                let b = v[(k, r - 1)];
                if b.norm() <= TIE_TOL {
                    (0.0, 0.0)
                } else if a.norm() <= TIE_TOL {
                    (0.0, FRAC_PI_2)
                } else {
                    let raw = (-a / b).arg().rem_euclid(TAU);
                    let f = if k == 1 { raw / 2.0 } else { raw };
                    (f, b.norm().atan2(a.norm()))
                }
            } else {
                let a = v[(0, r - 1)];
                let d = v[(r - 1, r - 1)];
                if a.norm() <= TIE_TOL {
                    (0.0, 0.0)
                } else if d.norm() <= TIE_TOL {
                    (0.0, FRAC_PI_2)
                } else {
                    let raw = (a / d).arg().rem_euclid(TAU);
                    let f = if k == 1 { raw / 2.0 } else { raw };
                    (f, a.norm().atan2(d.norm()))
                }
            };
            phi.push(f);
            psi.push(s);
            v = plane_rotation(r, 0, k, -s) * phase3(r, -f) * v;
        }
        let x = v.view((0, 0), (r - 1, r - 1)).into_owned();
        let xi = det(&x).arg().rem_euclid(TAU);
        let w = xi / (r - 1) as f64;
        omega_rev.push(w);
        let strip = Complex64::from_polar(1.0, -w);
        v = x.map(|z| z * strip);
    }
    omega_rev.reverse();
    (phi, psi, omega_rev)
}

fn so_inverse_raw(n: usize, m: &CMatrix) -> Vec<f64> {
    let mut phi = Vec::new();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| m[(r, c)].re).collect())
        .collect();
    let mut rank = n;
    while rank >= 2 {
        let r = rank;
        let mut col: Vec<f64> = (0..r).map(|i| v[i][r - 1]).collect();
        let mut angles = vec![0.0; r - 1];
        let mut peeled = true;
        for j in (2..r).rev() {
            let s = col[..j].iter().map(|x| x * x).sum::<f64>().sqrt();
            angles[j - 1] = s.atan2(col[j]);
            if s <= TIE_TOL {
                peeled = false;
                break;
            }
            for x in col[..j].iter_mut() {
                *x /= s;
            }
            col.truncate(j);
        }
        if peeled {
            let s = col[..1].iter().map(|x| x * x).sum::<f64>().sqrt();
            // top of the final 2-vector is sin(angle), below it cos(angle)
            if r == 2 || s > TIE_TOL {
                angles[0] = col[0].atan2(col[1]).rem_euclid(TAU);
            }
        }
        // strip the level: V <- (G^T V) principal block
        let mut g = CMatrix::identity(r, r);
        for k in 1..r {
            g = g * plane_rotation(r, k - 1, k, angles[k - 1]);
        }
        let mut vr = CMatrix::zeros(r, r);
        for i in 0..r {
            for c in 0..r {
                vr[(i, c)] = Complex64::new(v[i][c], 0.0);
            }
        }
        let stripped = g.transpose() * vr;
        v = (0..r - 1)
            .map(|i| (0..r - 1).map(|c| stripped[(i, c)].re).collect())
            .collect();
        phi.extend(angles);
        rank -= 1;
    }
    phi
}

/// Invert the coordinate map on a group element. The input must be special
/// unitary (or special orthogonal) to within a small tolerance; boundary
/// points resolve by the tie-break "set the undetermined angle to zero".
pub fn inverse(group: Group, n: usize, m: &CMatrix) -> Result<EulerAngles, EulerError> {
    if n < 2 {
        return Err(EulerError::RankTooSmall(n));
    }
    if m.nrows() != n || m.ncols() != n {
        return Err(EulerError::WrongMatrixSize {
            got: m.nrows(),
            want: n,
        });
    }
    let defect = membership_defect(group, m);
    if defect > MEMBERSHIP_TOL {
        return Err(EulerError::NotInGroup { group, n, defect });
    }
    match group {
        Group::Su => {
            let (phi, psi, omega) = su_inverse_raw(n, m);
            EulerAngles::new(group, n, phi, psi, omega)
        }
        Group::So => {
            let phi = so_inverse_raw(n, m);
            EulerAngles::new(group, n, phi, vec![], vec![])
        }
    }
}

/// D_{k,n}(z) = diag(e^{iz} x (n-1), e^{-i(n-1)z}, 1 x (k-n)), 2 <= n <= k.
pub fn d_matrix(k: usize, n: usize, z: f64) -> Result<CMatrix, EulerError> {
    if k < 2 {
        return Err(EulerError::RankTooSmall(k));
    }
    if n < 2 || n > k {
        return Err(EulerError::DiagonalIndex { rank: k, index: n });
    }
    let mut m = CMatrix::identity(k, k);
    for t in 0..n - 1 {
        m[(t, t)] = Complex64::from_polar(1.0, z);
    }
    m[(n - 1, n - 1)] = Complex64::from_polar(1.0, -((n - 1) as f64) * z);
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// D_{N,2}(z) F = F with the top leading phi shifted by z.
    LeftD2,
    /// F D_{N,N}(z) = F with the top omega shifted by z.
    RightDn,
    /// Inserting e^{z l3} after the first factor shifts the second phi.
    MidSu2,
    /// D_{N,N}(z) F pushed through to three simultaneous angle shifts.
    DnFull,
    /// D_{N,N-1}(z) F pushed through to six simultaneous angle shifts.
    Dn1Full,
}

impl ShiftKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left-D2" => Some(Self::LeftD2),
            "right-DN" => Some(Self::RightDn),
            "mid-SU2" => Some(Self::MidSu2),
            "DN-full" => Some(Self::DnFull),
            "DN-1-full" => Some(Self::Dn1Full),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LeftD2 => "left-D2",
            Self::RightDn => "right-DN",
            Self::MidSu2 => "mid-SU2",
            Self::DnFull => "DN-full",
            Self::Dn1Full => "DN-1-full",
        }
    }

    pub const ALL: [ShiftKind; 5] = [
        Self::LeftD2,
        Self::RightDn,
        Self::MidSu2,
        Self::DnFull,
        Self::Dn1Full,
    ];

    /// Smallest rank the identity holds at. The DN-1 push-through needs a
    /// scalar corner below the affected plane, hence rank 4.
    pub fn min_rank(&self) -> usize {
        match self {
            Self::LeftD2 | Self::RightDn => 2,
            Self::MidSu2 | Self::DnFull => 3,
            Self::Dn1Full => 4,
        }
    }
}

fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Uniform draw over the coordinate box, pulled 2% in from every edge.
/// Diagnostic utility: interior points make inverses and Jacobians
/// unambiguous, unlike the exact Haar sampler which can hit boundaries.
pub fn random_interior(group: Group, n: usize, rng: &mut impl rand::Rng) -> EulerAngles {
    let mut a = EulerAngles::zeros(group, n).expect("rank checked by caller");
    for spec in coordinate_specs(group, n) {
        let lo = spec.lo + 0.02 * (spec.hi - spec.lo);
        let hi = spec.hi - 0.02 * (spec.hi - spec.lo);
        let v = rng.gen_range(lo..hi);
        match spec.kind {
            CoordKind::Phi => a.phi[spec.index] = v,
            CoordKind::Psi => a.psi[spec.index] = v,
            CoordKind::Omega => a.omega[spec.index] = v,
        }
    }
    a
}

/// Residual of a diagonal-shift identity at the given angles; exact identities
/// give residuals at float-rounding level.
pub fn shift_identity_residual(
    kind: ShiftKind,
    n: usize,
    z: f64,
    angles: &EulerAngles,
) -> Result<f64, EulerError> {
    if angles.group != Group::Su {
        return Err(EulerError::ShiftGroup);
    }
    if angles.n != n {
        return Err(EulerError::WrongMatrixSize {
            got: angles.n,
            want: n,
        });
    }
    if n < kind.min_rank() {
        return Err(EulerError::ShiftRank {
            kind: kind.name(),
            n,
            min: kind.min_rank(),
        });
    }
    let f = forward(angles);
    let mut shifted = angles.clone();
    let lhs = match kind {
        ShiftKind::LeftD2 => {
            shifted.phi[0] += z;
            d_matrix(n, 2, z)? * f
        }
        ShiftKind::RightDn => {
            shifted.omega[n - 2] += z;
            f * d_matrix(n, n, z)?
        }
        ShiftKind::MidSu2 => {
            shifted.phi[1] += z;
            // rebuild the factorization with e^{z l3} after the first factor
            let a2 = phase3(n, angles.phi[0]) * plane_rotation(n, 0, 1, angles.psi[0]);
            let mut rest = CMatrix::identity(n, n);
            for k in 3..=n {
                rest = rest
                    * phase3(n, angles.phi[k - 2])
                    * plane_rotation(n, 0, k - 1, angles.psi[k - 2]);
            }
            let inner = su_forward_raw(
                n - 1,
                &angles.phi[n - 1..],
                &angles.psi[n - 1..],
                &angles.omega[..n - 2],
            );
            a2 * phase3(n, z)
                * rest
                * embed_upper(&inner, n)
                * omega_phase(n, angles.omega[n - 2])
        }
        ShiftKind::DnFull => {
            let nf = n as f64;
            shifted.phi[n - 2] += nf * z;
            shifted.phi[n - 1] -= nf * z;
            shifted.omega[n - 2] += z;
            d_matrix(n, n, z)? * f
        }
        ShiftKind::Dn1Full => {
            let nf = n as f64;
            shifted.phi[n - 3] += (nf - 1.0) * z;
            shifted.phi[n - 2] -= (nf - 2.0) * z;
            shifted.phi[n - 1] -= z;
            shifted.phi[2 * n - 4] += (nf - 1.0) * z;
            shifted.phi[2 * n - 3] -= (nf - 1.0) * z;
            shifted.omega[n - 3] += z;
            d_matrix(n, n - 1, z)? * f
        }
    };
    Ok(max_abs_diff(&lhs, &forward(&shifted)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{matrix_from_json, matrix_to_json};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rank_two_closed_form() {
        let (p, s, w) = (0.7, 0.4, 1.9);
        let a = EulerAngles::new(Group::Su, 2, vec![p], vec![s], vec![w]).unwrap();
        let m = forward(&a);
        let e = |t: f64| Complex64::from_polar(1.0, t);
        assert!((m[(0, 0)] - e(p + w) * s.cos()).norm() < 1e-14);
        assert!((m[(0, 1)] - e(p - w) * s.sin()).norm() < 1e-14);
        assert!((m[(1, 0)] + e(-(p - w)) * s.sin()).norm() < 1e-14);
        assert!((m[(1, 1)] - e(-(p + w)) * s.cos()).norm() < 1e-14);
    }

    #[test]
    fn rank_three_frozen_matrix() {
        let a = EulerAngles::new(
            Group::Su,
            3,
            vec![0.9, 2.1, 1.3],
            vec![0.5, 0.8, 0.3],
            vec![1.7, 0.6],
        )
        .unwrap();
        let m = forward(&a);
        let expect = [
            [
                (0.416184210527680, 0.210121758830545),
                (-0.591104915541371, 0.192132581428743),
                (-0.143032624031523, 0.613075254607803),
            ],
            [
                (0.080003955319500, 0.553696921411437),
                (0.515340681947149, 0.550602312092949),
                (-0.343918830250509, 0.0),
            ],
            [
                (0.614563293791439, 0.303266538956013),
                (-0.207767469878711, -0.042116551196660),
                (0.252457078727871, -0.649357884567166),
            ],
        ];
        for r in 0..3 {
            for c in 0..3 {
                let (re, im) = expect[r][c];
                assert!(
                    (m[(r, c)] - Complex64::new(re, im)).norm() < 1e-12,
                    "entry ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn forward_lands_in_group() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 2..=5 {
            for group in [Group::Su, Group::So] {
                let a = random_interior(group, n, &mut rng);
                let m = forward(&a);
                assert!(membership_defect(group, &m) < 1e-12, "{group}({n})");
            }
        }
    }

    #[test]
    fn round_trip_interior_angles() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in 2..=4 {
            for group in [Group::Su, Group::So] {
                for _ in 0..50 {
                    let a = random_interior(group, n, &mut rng);
                    let m = forward(&a);
                    let b = inverse(group, n, &m).unwrap();
                    let m2 = forward(&b);
                    assert!(max_abs_diff(&m, &m2) < 1e-9, "{group}({n}) matrix");
                    for (x, y) in a.phi.iter().zip(&b.phi) {
                        assert!((x - y).abs() < 1e-9, "{group}({n}) phi");
                    }
                    for (x, y) in a.psi.iter().zip(&b.psi) {
                        assert!((x - y).abs() < 1e-9, "{group}({n}) psi");
                    }
                    for (x, y) in a.omega.iter().zip(&b.omega) {
                        assert!((x - y).abs() < 1e-9, "{group}({n}) omega");
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_matrices_invert() {
        for n in 2..=4 {
            for group in [Group::Su, Group::So] {
                let id = CMatrix::identity(n, n);
                let a = inverse(group, n, &id).unwrap();
                assert!(max_abs_diff(&forward(&a), &id) < 1e-9, "{group}({n}) id");
            }
        }
        // a rotation hitting the psi = pi/2 tie-break
        let m = plane_rotation(3, 0, 2, FRAC_PI_2);
        let a = inverse(Group::Su, 3, &m).unwrap();
        assert!(max_abs_diff(&forward(&a), &m) < 1e-9);
        let b = inverse(Group::So, 3, &m).unwrap();
        assert!(max_abs_diff(&forward(&b), &m) < 1e-9);
    }

    #[test]
    fn inverse_rejects_non_members() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        assert!(matches!(
            inverse(Group::Su, 3, &m),
            Err(EulerError::NotInGroup { .. })
        ));
        // unitary but not real: fine for su, rejected for so
        let u = phase3(3, 0.4);
        assert!(inverse(Group::Su, 3, &u).is_ok());
        assert!(matches!(
            inverse(Group::So, 3, &u),
            Err(EulerError::NotInGroup { .. })
        ));
        assert!(matches!(
            inverse(Group::Su, 4, &CMatrix::identity(3, 3)),
            Err(EulerError::WrongMatrixSize { .. })
        ));
    }

    #[test]
    fn d_matrix_shape() {
        let d = d_matrix(4, 3, 0.5).unwrap();
        let e = |t: f64| Complex64::from_polar(1.0, t);
        assert!((d[(0, 0)] - e(0.5)).norm() < 1e-15);
        assert!((d[(1, 1)] - e(0.5)).norm() < 1e-15);
        assert!((d[(2, 2)] - e(-1.0)).norm() < 1e-15);
        assert!((d[(3, 3)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((det(&d) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            d_matrix(3, 4, 0.1),
            Err(EulerError::DiagonalIndex { .. })
        ));
        assert!(matches!(
            d_matrix(3, 1, 0.1),
            Err(EulerError::DiagonalIndex { .. })
        ));
    }

    #[test]
    fn shift_identities_hold() {
        let mut rng = StdRng::seed_from_u64(23);
        for n in 2..=4 {
            for _ in 0..25 {
                let a = random_interior(Group::Su, n, &mut rng);
                let z = rng.gen_range(-1.0..1.0);
                for kind in ShiftKind::ALL {
                    if n < kind.min_rank() {
                        assert!(matches!(
                            shift_identity_residual(kind, n, z, &a),
                            Err(EulerError::ShiftRank { .. })
                        ));
                        continue;
                    }
                    let res = shift_identity_residual(kind, n, z, &a).unwrap();
                    assert!(res < 1e-12, "{} at rank {n}: {res:.2e}", kind.name());
                }
            }
        }
    }

    #[test]
    fn shift_rejects_so_angles() {
        let a = EulerAngles::zeros(Group::So, 3).unwrap();
        assert!(matches!(
            shift_identity_residual(ShiftKind::LeftD2, 3, 0.3, &a),
            Err(EulerError::ShiftGroup)
        ));
        assert!(ShiftKind::parse("DN-full").is_some());
        assert!(ShiftKind::parse("sideways").is_none());
    }

    #[test]
    fn range_warnings_flag_exits() {
        let mut a = EulerAngles::zeros(Group::Su, 3).unwrap();
        assert!(a.range_warnings().is_empty());
        a.phi[0] = 4.0; // leading phi range is [0, pi]
        a.psi[2] = 2.0; // psi range is [0, pi/2]
        let w = a.range_warnings();
        assert_eq!(w.len(), 2);
        assert!(w[0].contains("phi[0]"));
        // still maps into the group
        assert!(membership_defect(Group::Su, &forward(&a)) < 1e-12);
    }

    #[test]
    fn coordinate_layout() {
        let specs = coordinate_specs(Group::Su, 3);
        // phi: level 3 block (indices 0, 1) then level 2 (index 2)
        assert_eq!(specs[0].level, 3);
        assert!(specs[0].leading());
        assert_eq!(specs[0].role, CoordRole::Circle { divisor: 2 });
        assert_eq!(specs[1].role, CoordRole::Circle { divisor: 1 });
        assert_eq!(specs[2].level, 2);
        assert!(specs[2].leading());
        // omegas carry their level index as divisor
        let omegas: Vec<_> = specs
            .iter()
            .filter(|s| s.kind == CoordKind::Omega)
            .collect();
        assert_eq!(omegas.len(), 2);
        assert_eq!(omegas[0].role, CoordRole::Circle { divisor: 1 });
        assert_eq!(omegas[1].role, CoordRole::Circle { divisor: 2 });
        assert!((omegas[1].hi - PI).abs() < 1e-15);

        let so_specs = coordinate_specs(Group::So, 4);
        assert_eq!(so_specs.len(), 6);
        assert_eq!(so_specs[0].role, CoordRole::Circle { divisor: 1 });
        assert_eq!(so_specs[1].role, CoordRole::Compact);
    }

    #[test]
    fn angle_json_round_trip() {
        let a = EulerAngles::new(
            Group::Su,
            3,
            vec![0.9, 2.1, 1.3],
            vec![0.5, 0.8, 0.3],
            vec![1.7, 0.6],
        )
        .unwrap();
        let j = a.to_json();
        assert_eq!(j["group"], "su");
        assert_eq!(j["n"], 3);
        let b = EulerAngles::from_json(&j).unwrap();
        assert_eq!(a, b);
        // malformed lengths are rejected
        let mut bad = j.clone();
        bad["phi"] = serde_json::json!([0.1]);
        assert!(EulerAngles::from_json(&bad).is_err());
        // matrix json round trip for the forward image
        let m = forward(&a);
        let mj = matrix_to_json(&m);
        assert!(max_abs_diff(&m, &matrix_from_json(&mj).unwrap()) < 1e-15);
    }
}
