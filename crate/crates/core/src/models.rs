//! Model Hamiltonians as `Operator` bundles on a shared register layout.
//!
//! Four fermion-boson models: Hubbard-Holstein (onsite coupling),
//! Dicke (collective spin), Hubbard-Fröhlich (long-range coupling) and a
//! single-mode SSH chain (hopping-coupled boson). Both first- and
//! second-quantised bosonic representations are supported where the model
//! admits them.

use crate::linalg::{identity, kron, CMat, C64};
use crate::operators::{
    coupling_quadrature, embed, jw_fermion_ops, pauli_x, pauli_z, single_mode_hb, Operator,
    OperatorError, Quantisation, RegisterLayout, DEFAULT_DIM_CAP,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BoundaryCondition {
    #[default]
    Open,
    Periodic,
}

/// Nearest-neighbour bond list `(i, j)` with `j = i+1` (mod N when periodic).
pub fn bonds(n: usize, boundary: BoundaryCondition) -> Vec<(usize, usize)> {
    match boundary {
        BoundaryCondition::Open => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        BoundaryCondition::Periodic => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HubbardHolsteinParams {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub g: f64,
    pub omega0: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub mu: f64,
    /// Grid size `M` (FirstQ) or occupation cutoff `Λ` (SecondQ).
    pub cutoff: usize,
    pub quantisation: Quantisation,
    #[serde(default)]
    pub boundary: BoundaryCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl HubbardHolsteinParams {
    pub fn boson_dim(&self) -> usize {
        match self.quantisation {
            Quantisation::FirstQ => self.cutoff,
            Quantisation::SecondQ => self.cutoff + 1,
        }
    }

    pub fn layout(&self) -> Result<RegisterLayout, OperatorError> {
        if self.omega0 <= 0.0 {
            return Err(OperatorError::Invalid("ω₀ > 0 required".into()));
        }
        if self.n_sites == 0 {
            return Err(OperatorError::Invalid("N ≥ 1 required".into()));
        }
        RegisterLayout::with_cap(
            self.n_sites,
            2,
            self.boson_dim(),
            self.n_sites,
            self.quantisation,
            self.max_dim.unwrap_or(DEFAULT_DIM_CAP),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DickeParams {
    #[serde(rename = "N")]
    pub n_atoms: usize,
    pub omega0: f64,
    #[serde(rename = "Omega")]
    pub omega_atom: f64,
    pub g: f64,
    #[serde(rename = "Lambda")]
    pub lambda: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl DickeParams {
    pub fn layout(&self) -> Result<RegisterLayout, OperatorError> {
        if self.omega0 <= 0.0 {
            return Err(OperatorError::Invalid("ω₀ > 0 required".into()));
        }
        RegisterLayout::with_cap(
            self.n_atoms,
            1,
            self.lambda + 1,
            1,
            Quantisation::SecondQ,
            self.max_dim.unwrap_or(DEFAULT_DIM_CAP),
        )
    }
}

/// Long-range coupling of the Hubbard-Fröhlich model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FrohlichCoupling {
    /// Built-in kernel `f(|i−j|) = κ/(|i−j|³+1)^{3/2}`, single mode.
    Kernel { kappa: f64 },
    /// Onsite delta kernel `f_{i,j} = g·δ_{i,j}`, the Holstein limit.
    Delta { g: f64 },
    /// Explicit table `f[i][j][γ]` flattened row-major.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrohlichParams {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub modes_per_site: usize,
    /// `ω_{i,γ}` flattened row-major over (site, mode).
    pub omegas: Vec<f64>,
    pub coupling: FrohlichCoupling,
    #[serde(rename = "U")]
    pub u: f64,
    pub mu: f64,
    pub cutoff: usize,
    pub quantisation: Quantisation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl FrohlichParams {
    pub fn boson_dim(&self) -> usize {
        match self.quantisation {
            Quantisation::FirstQ => self.cutoff,
            Quantisation::SecondQ => self.cutoff + 1,
        }
    }

    pub fn num_boson_registers(&self) -> usize {
        self.n_sites * self.modes_per_site
    }

    pub fn layout(&self) -> Result<RegisterLayout, OperatorError> {
        if self.omegas.len() != self.num_boson_registers() {
            return Err(OperatorError::Invalid(format!(
                "expected {} frequencies, got {}",
                self.num_boson_registers(),
                self.omegas.len()
            )));
        }
        if self.omegas.iter().any(|&w| w <= 0.0) {
            return Err(OperatorError::Invalid("all ω_{i,γ} > 0 required".into()));
        }
        RegisterLayout::with_cap(
            self.n_sites,
            2,
            self.boson_dim(),
            self.num_boson_registers(),
            self.quantisation,
            self.max_dim.unwrap_or(DEFAULT_DIM_CAP),
        )
    }

    /// Coupling strength between boson register (i, γ) and the fermion at j.
    pub fn f(&self, i: usize, j: usize, gamma: usize) -> f64 {
        match &self.coupling {
            FrohlichCoupling::Kernel { kappa } => {
                let d = (i as f64 - j as f64).abs();
                kappa / (d.powi(3) + 1.0).powf(1.5)
            }
            FrohlichCoupling::Delta { g } => {
                if i == j {
                    *g
                } else {
                    0.0
                }
            }
            FrohlichCoupling::Table { values } => {
                values[(i * self.n_sites + j) * self.modes_per_site + gamma]
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SSHParams {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub t_hop: f64,
    pub g: f64,
    pub omega0: f64,
    #[serde(rename = "Lambda")]
    pub lambda: usize,
    pub boundary: BoundaryCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl SSHParams {
    pub fn layout(&self) -> Result<RegisterLayout, OperatorError> {
        if self.boundary != BoundaryCondition::Periodic {
            return Err(OperatorError::Invalid(
                "SSH single-mode transform requires periodic boundary".into(),
            ));
        }
        if self.omega0 <= 0.0 {
            return Err(OperatorError::Invalid("ω₀ > 0 required".into()));
        }
        RegisterLayout::with_cap(
            self.n_sites,
            2,
            self.lambda + 1,
            1,
            Quantisation::SecondQ,
            self.max_dim.unwrap_or(DEFAULT_DIM_CAP),
        )
    }
}

/// Occupation of JW mode `k` in fermion basis index `f` (mode 0 is the
/// most significant bit).
pub fn mode_occupation(f: usize, k: usize, num_modes: usize) -> usize {
    (f >> (num_modes - 1 - k)) & 1
}

/// JW mode index of (site, spin) with site-major spin-minor ordering.
pub fn mode_index(site: usize, spin: usize) -> usize {
    2 * site + spin
}

/// Fermionic hopping `−Σ_{⟨i,j⟩,σ} (c†_{i,σ}c_{j,σ} + h.c.)` on the
/// fermion factor only.
pub fn hopping_matrix(
    n_sites: usize,
    boundary: BoundaryCondition,
) -> Result<CMat, OperatorError> {
    let num_modes = 2 * n_sites;
    let c = jw_fermion_ops(num_modes)?;
    let dim = 1usize << num_modes;
    let mut h = CMat::zeros((dim, dim));
    for (i, j) in bonds(n_sites, boundary) {
        for spin in 0..2 {
            let p = mode_index(i, spin);
            let q = mode_index(j, spin);
            let cd_p = crate::linalg::dagger(&c[p].matrix);
            let cd_q = crate::linalg::dagger(&c[q].matrix);
            h = h - &cd_p.dot(&c[q].matrix) - &cd_q.dot(&c[p].matrix);
        }
    }
    Ok(h)
}

/// Bare hopping sum `+Σ_{⟨i,j⟩,σ}(c†_{i,σ}c_{j,σ} + h.c.)` (no sign), used
/// by the SSH coupling term.
pub fn hopping_sum_matrix(
    n_sites: usize,
    boundary: BoundaryCondition,
) -> Result<CMat, OperatorError> {
    Ok(hopping_matrix(n_sites, boundary)?.mapv(|z| -z))
}

/// Diagonal fermionic term `Σ_i [U(n_{i↑}−½)(n_{i↓}−½) − μ n_i]` on the
/// fermion factor only.
pub fn fermion_diag_matrix(n_sites: usize, u: f64, mu: f64) -> CMat {
    let num_modes = 2 * n_sites;
    let dim = 1usize << num_modes;
    let mut h = CMat::zeros((dim, dim));
    for f in 0..dim {
        let mut val = 0.0;
        for i in 0..n_sites {
            let nu = mode_occupation(f, mode_index(i, 0), num_modes) as f64;
            let nd = mode_occupation(f, mode_index(i, 1), num_modes) as f64;
            val += u * (nu - 0.5) * (nd - 0.5) - mu * (nu + nd);
        }
        h[(f, f)] = C64::new(val, 0.0);
    }
    h
}

/// `n̂_i − 1` as a diagonal matrix on the fermion factor.
pub fn site_occ_minus_one(n_sites: usize, i: usize) -> CMat {
    let num_modes = 2 * n_sites;
    let dim = 1usize << num_modes;
    let mut m = CMat::zeros((dim, dim));
    for f in 0..dim {
        let n = mode_occupation(f, mode_index(i, 0), num_modes)
            + mode_occupation(f, mode_index(i, 1), num_modes);
        m[(f, f)] = C64::new(n as f64 - 1.0, 0.0);
    }
    m
}

/// `n̂_i` on the fermion factor.
pub fn site_number_op(n_sites: usize, i: usize) -> CMat {
    let num_modes = 2 * n_sites;
    let dim = 1usize << num_modes;
    let mut m = CMat::zeros((dim, dim));
    for f in 0..dim {
        let n = mode_occupation(f, mode_index(i, 0), num_modes)
            + mode_occupation(f, mode_index(i, 1), num_modes);
        m[(f, f)] = C64::new(n as f64, 0.0);
    }
    m
}

/// Hubbard-Holstein Hamiltonian blocks on the common layout.
#[derive(Debug, Clone)]
pub struct HubbardHolsteinOps {
    pub h_f_hop: Operator,
    pub h_f_diag: Operator,
    pub h_b: Operator,
    pub h_fb: Operator,
}

impl HubbardHolsteinOps {
    /// Full Hamiltonian `H_f + H_b + H_fb`.
    pub fn total(&self) -> Operator {
        let m = &(&self.h_f_hop.matrix + &self.h_f_diag.matrix)
            + &(&self.h_b.matrix + &self.h_fb.matrix);
        Operator::new(m, self.h_f_hop.layout.clone(), true).expect("sum of hermitian blocks")
    }
}

pub fn hh_hamiltonian(p: &HubbardHolsteinParams) -> Result<HubbardHolsteinOps, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let hop = hopping_matrix(p.n_sites, p.boundary)?;
    let fdiag = fermion_diag_matrix(p.n_sites, p.u, p.mu);
    let hb_site = single_mode_hb(bdim, p.quantisation, p.omega0);
    let quad = coupling_quadrature(bdim, p.quantisation);

    let h_f_hop = embed(&layout, Some(&hop), &[]);
    let h_f_diag = embed(&layout, Some(&fdiag), &[]);
    let mut h_b = CMat::zeros((layout.total_dim(), layout.total_dim()));
    let mut h_fb = h_b.clone();
    for i in 0..p.n_sites {
        h_b = h_b + &embed(&layout, None, &[(i, &hb_site)]);
        let occ = site_occ_minus_one(p.n_sites, i);
        h_fb = h_fb + &embed(&layout, Some(&occ), &[(i, &quad)]).mapv(|z| z * p.g);
    }
    Ok(HubbardHolsteinOps {
        h_f_hop: Operator::new(h_f_hop, layout.clone(), true)?,
        h_f_diag: Operator::new(h_f_diag, layout.clone(), true)?,
        h_b: Operator::new(h_b, layout.clone(), true)?,
        h_fb: Operator::new(h_fb, layout, true)?,
    })
}

#[derive(Debug, Clone)]
pub struct DickeOps {
    pub h_b: Operator,
    pub h_atom: Operator,
    pub h_fb: Operator,
}

impl DickeOps {
    pub fn total(&self) -> Operator {
        let m = &(&self.h_b.matrix + &self.h_atom.matrix) + &self.h_fb.matrix;
        Operator::new(m, self.h_b.layout.clone(), true).expect("sum of hermitian blocks")
    }
}

/// Collective spin `S_z = Σ Z_j` (or `S_x = Σ X_j`) on N qubits.
pub fn collective_spin(n: usize, pauli: &CMat) -> CMat {
    let dim = 1usize << n;
    let mut s = CMat::zeros((dim, dim));
    for j in 0..n {
        let mut factors: Vec<&CMat> = Vec::with_capacity(n);
        let id = identity(2);
        for k in 0..n {
            factors.push(if k == j { pauli } else { &id });
        }
        s = s + &crate::linalg::kron_all(&factors);
    }
    s
}

pub fn dicke_hamiltonian(p: &DickeParams) -> Result<DickeOps, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let hb = single_mode_hb(bdim, Quantisation::SecondQ, p.omega0);
    let quad = coupling_quadrature(bdim, Quantisation::SecondQ);
    let sz = collective_spin(p.n_atoms, &pauli_z());
    let sx = collective_spin(p.n_atoms, &pauli_x());

    let h_b = embed(&layout, None, &[(0, &hb)]);
    let h_atom = embed(&layout, Some(&sz), &[]).mapv(|z| z * p.omega_atom);
    let h_fb = kron(&sx, &quad).mapv(|z| z * p.g);
    Ok(DickeOps {
        h_b: Operator::new(h_b, layout.clone(), true)?,
        h_atom: Operator::new(h_atom, layout.clone(), true)?,
        h_fb: Operator::new(h_fb, layout, true)?,
    })
}

#[derive(Debug, Clone)]
pub struct FrohlichOps {
    pub h_b: Operator,
    pub h_fb: Operator,
    pub h_f_diag: Operator,
    pub h_f_hop: Operator,
}

impl FrohlichOps {
    pub fn total(&self) -> Operator {
        let m = &(&self.h_b.matrix + &self.h_fb.matrix)
            + &(&self.h_f_diag.matrix + &self.h_f_hop.matrix);
        Operator::new(m, self.h_b.layout.clone(), true).expect("sum of hermitian blocks")
    }
}

pub fn frohlich_hamiltonian(p: &FrohlichParams) -> Result<FrohlichOps, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let quad = coupling_quadrature(bdim, p.quantisation);
    let dim = layout.total_dim();

    let mut h_b = CMat::zeros((dim, dim));
    let mut h_fb = CMat::zeros((dim, dim));
    for i in 0..p.n_sites {
        for gamma in 0..p.modes_per_site {
            let reg = i * p.modes_per_site + gamma;
            let hb_site = single_mode_hb(bdim, p.quantisation, p.omegas[reg]);
            h_b = h_b + &embed(&layout, None, &[(reg, &hb_site)]);
            for j in 0..p.n_sites {
                let f = p.f(i, j, gamma);
                if f == 0.0 {
                    continue;
                }
                let occ = site_occ_minus_one(p.n_sites, j);
                h_fb = h_fb + &embed(&layout, Some(&occ), &[(reg, &quad)]).mapv(|z| z * f);
            }
        }
    }
    let hop = hopping_matrix(p.n_sites, BoundaryCondition::Open)?;
    let fdiag = fermion_diag_matrix(p.n_sites, p.u, p.mu);
    Ok(FrohlichOps {
        h_b: Operator::new(h_b, layout.clone(), true)?,
        h_fb: Operator::new(h_fb, layout.clone(), true)?,
        h_f_diag: Operator::new(embed(&layout, Some(&fdiag), &[]), layout.clone(), true)?,
        h_f_hop: Operator::new(embed(&layout, Some(&hop), &[]), layout, true)?,
    })
}

#[derive(Debug, Clone)]
pub struct SshOps {
    pub h_hop: Operator,
    pub h_fb: Operator,
    pub h_b: Operator,
}

impl SshOps {
    pub fn total(&self) -> Operator {
        let m = &(&self.h_hop.matrix + &self.h_fb.matrix) + &self.h_b.matrix;
        Operator::new(m, self.h_b.layout.clone(), true).expect("sum of hermitian blocks")
    }
}

pub fn ssh_hamiltonian_single_mode(p: &SSHParams) -> Result<SshOps, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let hop_sum = hopping_sum_matrix(p.n_sites, p.boundary)?;
    let hb = single_mode_hb(bdim, Quantisation::SecondQ, p.omega0);
    let quad = coupling_quadrature(bdim, Quantisation::SecondQ);

    let h_hop = embed(&layout, Some(&hop_sum), &[]).mapv(|z| z * (-p.t_hop));
    let h_fb = kron(&hop_sum, &quad).mapv(|z| z * p.g);
    let h_b = embed(&layout, None, &[(0, &hb)]);
    Ok(SshOps {
        h_hop: Operator::new(h_hop, layout.clone(), true)?,
        h_fb: Operator::new(h_fb, layout.clone(), true)?,
        h_b: Operator::new(h_b, layout, true)?,
    })
}
