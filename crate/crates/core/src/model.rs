//! Inhomogeneous Hubbard chain with a linearly ramped on-site potential.
//!
//! Basis convention: site `i` (1-based) is bit `i - 1` of an occupation
//! mask. Fermionic modes are ordered with all spin-up modes before all
//! spin-down modes, sites ascending within each spin; signs follow the
//! Jordan-Wigner string in that order. Configurations are listed in
//! lexicographic order of the `(up, down)` mask pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermitianOperator, SparseSymmetric};

/// Largest chain the occupation masks are allowed to describe.
pub const MAX_SITES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct HubbardParams {
    pub n_sites: usize,
    /// Hopping `J`; sets the energy unit.
    pub hopping: f64,
    /// On-site repulsion `U`.
    pub interaction: f64,
    pub n_up: usize,
    pub n_down: usize,
}

impl HubbardParams {
    pub fn new(
        n_sites: usize,
        hopping: f64,
        interaction: f64,
        n_up: usize,
        n_down: usize,
    ) -> Result<Self> {
        let p = Self {
            n_sites,
            hopping,
            interaction,
            n_up,
            n_down,
        };
        p.validate()?;
        Ok(p)
    }

    /// Half filling with `J = 1`: `n_up = n_down = N / 2`.
    pub fn half_filled(n_sites: usize, interaction: f64) -> Result<Self> {
        if n_sites % 2 != 0 {
            return Err(Error::domain(format!(
                "half filling needs an even number of sites, got {n_sites}"
            )));
        }
        Self::new(n_sites, 1.0, interaction, n_sites / 2, n_sites / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_SITES {
            return Err(Error::domain(format!(
                "n_sites must be in 1..={MAX_SITES}, got {}",
                self.n_sites
            )));
        }
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return Err(Error::domain(format!(
                "hopping must be positive, got {}",
                self.hopping
            )));
        }
        if !(self.interaction.is_finite() && self.interaction >= 0.0) {
            return Err(Error::domain(format!(
                "interaction must be non-negative, got {}",
                self.interaction
            )));
        }
        if self.n_up > self.n_sites || self.n_down > self.n_sites {
            return Err(Error::domain(format!(
                "occupations ({}, {}) exceed {} sites",
                self.n_up, self.n_down, self.n_sites
            )));
        }
        Ok(())
    }

    pub fn n_particles(&self) -> usize {
        self.n_up + self.n_down
    }
}

/// How the site index maps onto the linear potential profile.
///
/// Both conventions give `v_i(t) = mu0 * c_i + mu_tau * c_i * t / tau`
/// with a site coefficient `c_i` that is linear in `i`:
///
/// * `Symmetric`: `c_i = 2 (i - 1) / (N - 1) - 1`, so the end sites sit at
///   `-1` and `+1` and the end-to-end potential difference is exactly
///   `2 mu0` at `t = 0` and `2 (mu0 + mu_tau)` at `t = tau` (1 J to 10 J
///   with the default amplitudes).
/// * `Literal`: `c_i = 2 i / N - 1` for `i` in `1..=N`; the end-to-end
///   difference is smaller by a factor `(N - 1) / N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteConvention {
    #[default]
    Symmetric,
    Literal,
}

impl SiteConvention {
    pub fn coefficient(self, i: usize, n_sites: usize) -> f64 {
        match self {
            SiteConvention::Literal => 2.0 * i as f64 / n_sites as f64 - 1.0,
            SiteConvention::Symmetric => {
                if n_sites == 1 {
                    0.0
                } else {
                    2.0 * (i - 1) as f64 / (n_sites - 1) as f64 - 1.0
                }
            }
        }
    }
}

impl std::fmt::Display for SiteConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SiteConvention::Symmetric => "symmetric",
            SiteConvention::Literal => "literal",
        })
    }
}

/// Linear ramp of a uniform field across the chain over `[0, tau]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveProtocol {
    pub mu0: f64,
    pub mu_tau: f64,
    pub tau: f64,
    pub convention: SiteConvention,
}

impl DriveProtocol {
    pub const DEFAULT_MU0: f64 = 0.5;
    pub const DEFAULT_MU_TAU: f64 = 4.5;

    /// Default amplitudes (`mu0 = 0.5 J`, `mu_tau = 4.5 J`), symmetric sites.
    pub fn new(tau: f64) -> Result<Self> {
        Self::with_amplitudes(
            Self::DEFAULT_MU0,
            Self::DEFAULT_MU_TAU,
            tau,
            SiteConvention::default(),
        )
    }

    pub fn with_amplitudes(
        mu0: f64,
        mu_tau: f64,
        tau: f64,
        convention: SiteConvention,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        if !(mu0.is_finite() && mu_tau.is_finite()) {
            return Err(Error::domain("drive amplitudes must be finite"));
        }
        Ok(Self {
            mu0,
            mu_tau,
            tau,
            convention,
        })
    }

    /// `mu_i^0`.
    pub fn initial_offset(&self, i: usize, n_sites: usize) -> f64 {
        self.mu0 * self.convention.coefficient(i, n_sites)
    }

    /// `mu_i^tau`.
    pub fn ramp_offset(&self, i: usize, n_sites: usize) -> f64 {
        self.mu_tau * self.convention.coefficient(i, n_sites)
    }

    /// `v_i(t)` without range checks.
    pub fn potential(&self, i: usize, t: f64, n_sites: usize) -> f64 {
        self.initial_offset(i, n_sites) + self.ramp_offset(i, n_sites) * t / self.tau
    }

    /// `dv_i / dt`, constant in time.
    pub fn potential_rate(&self, i: usize, n_sites: usize) -> f64 {
        self.ramp_offset(i, n_sites) / self.tau
    }
}

/// `v_i(t) = mu_i^0 + mu_i^tau t / tau` for site `i` in `1..=N`, `t` in `[0, tau]`.
pub fn onsite_potential(i: usize, t: f64, drive: &DriveProtocol, n_sites: usize) -> Result<f64> {
    if i == 0 || i > n_sites {
        return Err(Error::domain(format!(
            "site index {i} outside 1..={n_sites}"
        )));
    }
    let slack = 1e-12 * drive.tau;
    if !(t >= -slack && t <= drive.tau + slack) {
        return Err(Error::domain(format!(
            "time {t} outside [0, {}]",
            drive.tau
        )));
    }
    Ok(drive.potential(i, t, n_sites))
}

/// Occupation-number basis of one `(n_up, n_down)` sector.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_sites: usize,
    n_up: usize,
    n_down: usize,
    configurations: Vec<(u32, u32)>,
    up_rank: Vec<u32>,
    down_rank: Vec<u32>,
    n_down_masks: usize,
}

const NO_RANK: u32 = u32::MAX;

fn masks_with(n_sites: usize, count: usize) -> Vec<u32> {
    (0u32..(1u32 << n_sites))
        .filter(|m| m.count_ones() as usize == count)
        .collect()
}

pub fn build_sector_basis(n_sites: usize, n_up: usize, n_down: usize) -> Result<SectorBasis> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::domain(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if n_up > n_sites || n_down > n_sites {
        return Err(Error::domain(format!(
            "occupations ({n_up}, {n_down}) exceed {n_sites} sites"
        )));
    }
    let ups = masks_with(n_sites, n_up);
    let downs = masks_with(n_sites, n_down);
    let mut up_rank = vec![NO_RANK; 1 << n_sites];
    let mut down_rank = vec![NO_RANK; 1 << n_sites];
    for (r, &m) in ups.iter().enumerate() {
        up_rank[m as usize] = r as u32;
    }
    for (r, &m) in downs.iter().enumerate() {
        down_rank[m as usize] = r as u32;
    }
    let configurations = ups
        .iter()
        .flat_map(|&u| downs.iter().map(move |&d| (u, d)))
        .collect();
    Ok(SectorBasis {
        n_sites,
        n_up,
        n_down,
        configurations,
        up_rank,
        down_rank,
        n_down_masks: downs.len(),
    })
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn dim(&self) -> usize {
        self.configurations.len()
    }

    pub fn configurations(&self) -> &[(u32, u32)] {
        &self.configurations
    }

    pub fn index_of(&self, up: u32, down: u32) -> Option<usize> {
        let ru = *self.up_rank.get(up as usize)?;
        let rd = *self.down_rank.get(down as usize)?;
        if ru == NO_RANK || rd == NO_RANK {
            return None;
        }
        Some(ru as usize * self.n_down_masks + rd as usize)
    }

    /// Total occupation of site `i` (1-based) in configuration `k`.
    pub fn site_occupation(&self, k: usize, i: usize) -> u32 {
        let (u, d) = self.configurations[k];
        let bit = 1u32 << (i - 1);
        (u & bit != 0) as u32 + (d & bit != 0) as u32
    }

    fn matches(&self, params: &HubbardParams) -> bool {
        self.n_sites == params.n_sites && self.n_up == params.n_up && self.n_down == params.n_down
    }
}

/// Sign of `c^dagger_to c_from` acting on a single-spin mask with `from`
/// occupied and `to` empty: the parity of occupied modes strictly between.
fn hop_sign(mask: u32, from: usize, to: usize) -> f64 {
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let between = if hi - lo > 1 {
        (mask >> (lo + 1)) & ((1u32 << (hi - lo - 1)) - 1)
    } else {
        0
    };
    if between.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Hopping plus interaction terms (everything except the external potential).
fn static_triplets(params: &HubbardParams, basis: &SectorBasis) -> Vec<(usize, usize, f64)> {
    let n = basis.n_sites;
    let mut triplets = Vec::new();
    for (k, &(u, d)) in basis.configurations.iter().enumerate() {
        let doubles = (u & d).count_ones() as f64;
        triplets.push((k, k, params.interaction * doubles));
        for b in 0..n.saturating_sub(1) {
            let pair = (1u32 << b) | (1u32 << (b + 1));
            for spin in 0..2 {
                let mask = if spin == 0 { u } else { d };
                if (mask & pair).count_ones() != 1 {
                    continue;
                }
                let (from, to) = if mask & (1 << b) != 0 { (b, b + 1) } else { (b + 1, b) };
                let moved = mask ^ pair;
                let target = if spin == 0 {
                    basis.index_of(moved, d)
                } else {
                    basis.index_of(u, moved)
                };
                let target = target.expect("hop stays inside the sector");
                triplets.push((target, k, -params.hopping * hop_sign(mask, from, to)));
            }
        }
    }
    triplets
}

fn occupation_diagonals(basis: &SectorBasis) -> Vec<Vec<f64>> {
    (1..=basis.n_sites)
        .map(|i| {
            (0..basis.dim())
                .map(|k| basis.site_occupation(k, i) as f64)
                .collect()
        })
        .collect()
}

fn potential_diagonal(
    occupations: &[Vec<f64>],
    dim: usize,
    per_site: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut diag = vec![0.0; dim];
    for (site, occ) in occupations.iter().enumerate() {
        let v = per_site(site + 1);
        if v == 0.0 {
            continue;
        }
        for (d, &o) in diag.iter_mut().zip(occ) {
            *d += v * o;
        }
    }
    diag
}

/// `H(t) = -J sum (c^dagger_{i s} c_{i+1 s} + h.c.) + U sum n_up n_down + sum v_i(t) n_i`
/// on an open chain.
pub fn build_hamiltonian(
    params: &HubbardParams,
    basis: &SectorBasis,
    drive: &DriveProtocol,
    t: f64,
) -> Result<HermitianOperator> {
    params.validate()?;
    if !basis.matches(params) {
        return Err(Error::domain(format!(
            "basis sector (N={}, up={}, down={}) does not match parameters (N={}, up={}, down={})",
            basis.n_sites, basis.n_up, basis.n_down, params.n_sites, params.n_up, params.n_down
        )));
    }
    let chain = HubbardChain::with_basis(params.clone(), basis.clone());
    Ok(chain.hamiltonian(drive, t))
}

/// `dH/dt = sum_i (mu_i^tau / tau) n_i`, exact and time independent.
pub fn hamiltonian_time_derivative(basis: &SectorBasis, drive: &DriveProtocol) -> HermitianOperator {
    let occ = occupation_diagonals(basis);
    let diag = potential_diagonal(&occ, basis.dim(), |i| {
        drive.potential_rate(i, basis.n_sites)
    });
    HermitianOperator::from_diagonal(&diag)
}

/// `n_i = n_{i up} + n_{i down}` for `i = 1..=N`.
pub fn site_occupation_operators(basis: &SectorBasis) -> Vec<HermitianOperator> {
    occupation_diagonals(basis)
        .iter()
        .map(|d| HermitianOperator::from_diagonal(d))
        .collect()
}

/// A chain with its sector basis and the drive-independent part of the
/// Hamiltonian precomputed.
#[derive(Clone, Debug)]
pub struct HubbardChain {
    params: HubbardParams,
    basis: SectorBasis,
    static_part: SparseSymmetric,
    occupations: Vec<Vec<f64>>,
}

impl HubbardChain {
    pub fn new(params: HubbardParams) -> Result<Self> {
        params.validate()?;
        let basis = build_sector_basis(params.n_sites, params.n_up, params.n_down)?;
        Ok(Self::with_basis(params, basis))
    }

    fn with_basis(params: HubbardParams, basis: SectorBasis) -> Self {
        let static_part =
            SparseSymmetric::from_triplets(basis.dim(), static_triplets(&params, &basis));
        let occupations = occupation_diagonals(&basis);
        Self {
            params,
            basis,
            static_part,
            occupations,
        }
    }

    pub fn params(&self) -> &HubbardParams {
        &self.params
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Diagonal of `sum_i v_i(t) n_i`.
    pub fn potential_diagonal(&self, drive: &DriveProtocol, t: f64) -> Vec<f64> {
        let n = self.params.n_sites;
        potential_diagonal(&self.occupations, self.dim(), |i| drive.potential(i, t, n))
    }

    pub fn sparse_hamiltonian(&self, drive: &DriveProtocol, t: f64) -> SparseSymmetric {
        self.static_part
            .with_diagonal(&self.potential_diagonal(drive, t))
    }

    pub fn hamiltonian(&self, drive: &DriveProtocol, t: f64) -> HermitianOperator {
        let dense = self.sparse_hamiltonian(drive, t).to_dense();
        HermitianOperator::new(dense).expect("Hubbard Hamiltonian is Hermitian by construction")
    }

    pub fn time_derivative(&self, drive: &DriveProtocol) -> HermitianOperator {
        hamiltonian_time_derivative(&self.basis, drive)
    }

    pub fn occupation_operators(&self) -> Vec<HermitianOperator> {
        self.occupations
            .iter()
            .map(|d| HermitianOperator::from_diagonal(d))
            .collect()
    }

    /// Diagonals of the site occupation operators, site-major.
    pub fn occupation_diagonals(&self) -> &[Vec<f64>] {
        &self.occupations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, eigvalsh};

    #[test]
    fn sector_dimensions() {
        assert_eq!(build_sector_basis(6, 3, 3).unwrap().dim(), 400);
        assert_eq!(build_sector_basis(2, 1, 1).unwrap().dim(), 4);
        assert_eq!(build_sector_basis(4, 2, 2).unwrap().dim(), 36);
        assert_eq!(build_sector_basis(3, 0, 3).unwrap().dim(), 1);
    }

    #[test]
    fn sector_rejects_bad_counts() {
        assert!(build_sector_basis(4, 5, 0).is_err());
        assert!(build_sector_basis(0, 0, 0).is_err());
        assert!(build_sector_basis(17, 1, 1).is_err());
    }

    #[test]
    fn sector_ordering_is_lexicographic() {
        let b = build_sector_basis(4, 2, 1).unwrap();
        let confs = b.configurations();
        assert!(confs.windows(2).all(|w| w[0] < w[1]));
        for (k, &(u, d)) in confs.iter().enumerate() {
            assert_eq!(u.count_ones(), 2);
            assert_eq!(d.count_ones(), 1);
            assert_eq!(b.index_of(u, d), Some(k));
        }
        assert_eq!(b.index_of(0b0001, 0b0001), None);
    }

    #[test]
    fn literal_potential_values() {
        let drive =
            DriveProtocol::with_amplitudes(0.5, 4.5, 1.0, SiteConvention::Literal).unwrap();
        assert!((onsite_potential(3, 0.0, &drive, 6).unwrap() - 0.0).abs() < 1e-15);
        assert!((onsite_potential(6, 0.0, &drive, 6).unwrap() - 0.5).abs() < 1e-15);
        assert!((onsite_potential(6, 1.0, &drive, 6).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_potential_spans_one_to_ten() {
        let drive = DriveProtocol::new(2.0).unwrap();
        let v = |i, t| onsite_potential(i, t, &drive, 6).unwrap();
        assert!((v(6, 0.0) - v(1, 0.0) - 1.0).abs() < 1e-14);
        assert!((v(6, 2.0) - v(1, 2.0) - 10.0).abs() < 1e-14);
        assert!((v(6, 0.0) - 0.5).abs() < 1e-15);
        assert!((v(6, 2.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn potential_rejects_bad_site_or_time() {
        let drive = DriveProtocol::new(1.0).unwrap();
        assert!(onsite_potential(0, 0.0, &drive, 6).is_err());
        assert!(onsite_potential(7, 0.0, &drive, 6).is_err());
        assert!(onsite_potential(1, 1.5, &drive, 6).is_err());
    }

    #[test]
    fn drive_is_linear_in_time() {
        let drive = DriveProtocol::new(3.0).unwrap();
        for i in 1..=6 {
            let (t1, t2) = (0.25, 2.5);
            let lhs = drive.potential(i, t1, 6) + drive.potential(i, t2, 6)
                - 2.0 * drive.potential(i, 0.5 * (t1 + t2), 6);
            assert!(lhs.abs() < 1e-14);
        }
    }

    #[test]
    fn hop_sign_counts_intermediate_modes() {
        assert_eq!(hop_sign(0b0001, 0, 1), 1.0);
        assert_eq!(hop_sign(0b0101, 0, 3), -1.0);
        assert_eq!(hop_sign(0b0111, 0, 3), 1.0);
    }

    fn dimer_spectrum(u: f64) -> Vec<f64> {
        let r = (u * u + 16.0).sqrt();
        let mut e = vec![0.0, u, 0.5 * (u - r), 0.5 * (u + r)];
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn dimer_spectrum_matches_closed_form() {
        for u in [0.0, 5.0, 10.0] {
            let params = HubbardParams::half_filled(2, u).unwrap();
            let basis = build_sector_basis(2, 1, 1).unwrap();
            let flat = DriveProtocol::with_amplitudes(0.0, 0.0, 1.0, SiteConvention::Symmetric)
                .unwrap();
            let h = build_hamiltonian(&params, &basis, &flat, 0.0).unwrap();
            let ev = eigvalsh(h.matrix()).unwrap();
            for (a, b) in ev.iter().zip(dimer_spectrum(u)) {
                assert!((a - b).abs() < 1e-10, "U={u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn build_hamiltonian_rejects_mismatched_basis() {
        let params = HubbardParams::half_filled(4, 1.0).unwrap();
        let basis = build_sector_basis(4, 1, 2).unwrap();
        let drive = DriveProtocol::new(1.0).unwrap();
        assert!(build_hamiltonian(&params, &basis, &drive, 0.0).is_err());
    }

    #[test]
    fn time_derivative_entry_for_double_occupation_at_last_site() {
        let basis = build_sector_basis(6, 3, 3).unwrap();
        let drive = DriveProtocol::new(1.0).unwrap();
        let hdot = hamiltonian_time_derivative(&basis, &drive);
        let (u, d) = (0b100011, 0b100011);
        let k = basis.index_of(u, d).unwrap();
        let mut expected = 0.0;
        for i in 1..=6 {
            let occ = ((u >> (i - 1)) & 1) + ((d >> (i - 1)) & 1);
            expected += occ as f64 * drive.ramp_offset(i, 6);
        }
        assert!((hdot.matrix()[(k, k)].re - expected).abs() < 1e-12);
        // the site-6 contribution of a doubly occupied last site
        assert!((2.0 * drive.ramp_offset(6, 6) - 9.0).abs() < 1e-14);
        assert!(hdot.is_diagonal());
    }

    #[test]
    fn time_derivative_vanishes_for_slow_ramps() {
        let basis = build_sector_basis(4, 2, 2).unwrap();
        let drive = DriveProtocol::new(1e12).unwrap();
        let hdot = hamiltonian_time_derivative(&basis, &drive);
        assert!(hdot.matrix().norm_max() < 1e-8);
    }

    #[test]
    fn occupations_sum_to_particle_number() {
        let basis = build_sector_basis(6, 3, 3).unwrap();
        let ops = site_occupation_operators(&basis);
        assert_eq!(ops.len(), 6);
        for k in 0..basis.dim() {
            let total: f64 = ops.iter().map(|o| o.matrix()[(k, k)].re).sum();
            assert_eq!(total, 6.0);
        }
        for op in &ops {
            assert!(op
                .diagonal_values()
                .iter()
                .all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
        }
        let b2 = build_sector_basis(2, 1, 1).unwrap();
        let k = b2.index_of(0b01, 0b01).unwrap();
        assert_eq!(site_occupation_operators(&b2)[0].matrix()[(k, k)], c64::new(2.0, 0.0));
    }

    #[test]
    fn hamiltonian_conserves_particle_number() {
        let chain = HubbardChain::new(HubbardParams::half_filled(4, 5.0).unwrap()).unwrap();
        let drive = DriveProtocol::new(2.0).unwrap();
        let ops = chain.occupation_operators();
        let total: Vec<f64> = (0..chain.dim())
            .map(|k| ops.iter().map(|o| o.matrix()[(k, k)].re).sum())
            .collect();
        let n_total = HermitianOperator::from_diagonal(&total);
        for t in [0.0, 0.7, 2.0] {
            let h = chain.hamiltonian(&drive, t);
            assert!(h.hermiticity_deviation() < 1e-12);
            assert!(h.commutator_norm(&n_total) < 1e-12);
        }
    }
}
