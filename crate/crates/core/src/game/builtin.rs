use std::f64::consts::{E, PI};

use super::{CostConstants, Dissipativity, FinitePlayerGame, LinearStatistics, MeanFieldCost, Potential};
use crate::error::{invalid, Result};
use crate::measures::{AtomView, DiscreteMeasure};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sup |tanh''| = 4 / (3√3)`.
const TANH_CURVATURE: f64 = 0.769_800_358_919_501;

macro_rules! linear_stat_cost {
    () => {
        fn eval(&self, x: &[f64], m: AtomView<'_>) -> f64 {
            let s = self.average(m);
            self.eval_stat(x, &s)
        }

        fn grad_x(&self, x: &[f64], m: AtomView<'_>, out: &mut [f64]) {
            let s = self.average(m);
            self.grad_stat(x, &s, out)
        }

        fn linear_statistics(&self) -> Option<&dyn LinearStatistics> {
            Some(self)
        }
    };
}

// ---------------------------------------------------------------------------
// Linear-quadratic

/// `F(x, m) = a|x|²/2 + b x·mean(m)`.
#[derive(Clone, Debug)]
pub struct Lq {
    dim: usize,
    a: f64,
    b: f64,
    constants: CostConstants,
}

impl Lq {
    pub fn new(dim: usize, a: f64, b: f64) -> Self {
        let dissipativity = (a > b.abs()).then(|| Dissipativity { alpha: 2.0 * (a - b.abs()), c1: 0.0, c2: b.abs() });
        Self {
            dim: dim.max(1),
            a,
            b,
            constants: CostConstants {
                dm_constant: a + b.min(0.0),
                convexity_constant: Some(a),
                lipschitz_bound: a.abs() + b.abs(),
                wasserstein_lipschitz: None,
                dissipativity,
                weak_dm_constant: None,
                lasry_lions: b >= 0.0,
            },
        }
    }

    /// The measure-independent `|x|²/2`.
    pub fn quadratic(dim: usize) -> Self {
        Self::new(dim, 1.0, 0.0)
    }

    /// Overrides the declared dissipativity constants.
    pub fn with_dissipativity(mut self, d: Option<Dissipativity>) -> Self {
        self.constants.dissipativity = d;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

impl LinearStatistics for Lq {
    fn len(&self) -> usize {
        self.dim
    }

    fn feature(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y)
    }

    fn eval_stat(&self, x: &[f64], s: &[f64]) -> f64 {
        0.5 * self.a * dot(x, x) + self.b * dot(x, s)
    }

    fn grad_stat(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            out[k] = self.a * x[k] + self.b * s[k];
        }
    }
}

impl MeanFieldCost for Lq {
    linear_stat_cost!();

    fn id(&self) -> String {
        format!("lq(a={},b={},d={})", self.a, self.b, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        let s = m.mean();
        Some(self.b * x.iter().zip(y).zip(&s).map(|((xi, yi), si)| xi * (yi - si)).sum::<f64>())
    }

    fn lions_deriv(&self, x: &[f64], _m: AtomView<'_>, _y: &[f64], out: &mut [f64]) -> bool {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.b * xi;
        }
        true
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn lq_coefficients(&self) -> Option<(f64, f64)> {
        Some((self.a, self.b))
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        // mean-zero Dirac: ∇F(0, δ_0) = 0 and F(·, δ_0) convex
        if self.a > 0.0 { DiscreteMeasure::dirac(&vec![0.0; self.dim]).ok() } else { None }
    }
}

// ---------------------------------------------------------------------------
// Convolution

/// Odd bounded interaction kernels `φ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Sin,
    Tanh,
}

impl Kernel {
    fn value(self, z: f64) -> f64 {
        match self {
            Kernel::Sin => z.sin(),
            Kernel::Tanh => z.tanh(),
        }
    }

    fn slope(self, z: f64) -> f64 {
        match self {
            Kernel::Sin => z.cos(),
            Kernel::Tanh => {
                let c = z.cosh();
                1.0 / (c * c)
            }
        }
    }

    fn curvature_bound(self) -> f64 {
        match self {
            Kernel::Sin => 1.0,
            Kernel::Tanh => TANH_CURVATURE,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kernel::Sin => "sin",
            Kernel::Tanh => "tanh",
        }
    }
}

/// Confinement `g` of the convolution game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Well {
    /// `g(x) = c x²`.
    Quadratic { c: f64 },
    /// `g(x) = c·dist(x, [−L, L])²`: flat inside, quadratic walls.
    Flat { c: f64, half_width: f64 },
}

impl Well {
    fn value(self, x: f64) -> f64 {
        match self {
            Well::Quadratic { c } => c * x * x,
            Well::Flat { c, half_width } => {
                let e = (x.abs() - half_width).max(0.0);
                c * e * e
            }
        }
    }

    fn slope(self, x: f64) -> f64 {
        match self {
            Well::Quadratic { c } => 2.0 * c * x,
            Well::Flat { c, half_width } => 2.0 * c * (x.abs() - half_width).max(0.0) * x.signum(),
        }
    }

    fn convexity(self) -> f64 {
        match self {
            Well::Quadratic { c } => 2.0 * c,
            Well::Flat { .. } => 0.0,
        }
    }
}

/// `F(x, m) = amp ∫φ(x − y) m(dy) + g(x)` with `φ` odd and bounded.
#[derive(Clone, Debug)]
pub struct Convolution {
    kernel: Kernel,
    amp: f64,
    well: Well,
    constants: CostConstants,
}

impl Convolution {
    pub fn new(kernel: Kernel, amp: f64, well: Well) -> Result<Self> {
        if !(amp >= 0.0 && amp.is_finite()) {
            return invalid(format!("convolution amplitude must be non-negative, got {amp}"));
        }
        let (c, l) = match well {
            Well::Quadratic { c } => (c, 0.0),
            Well::Flat { c, half_width } => {
                if !(half_width >= 0.0) {
                    return invalid("flat well half-width must be non-negative");
                }
                (c, half_width)
            }
        };
        if !(c > 0.0) {
            return invalid(format!("well stiffness must be positive, got {c}"));
        }
        let k = amp * kernel.curvature_bound();
        let slope_max = amp;
        // 2x·g'(x) ≥ 4c(x² − L|x|), |φ'| ≤ amp, then Young with c x².
        let lin = 4.0 * c * l + 2.0 * slope_max;
        let constants = CostConstants {
            dm_constant: well.convexity() - k,
            convexity_constant: Some(well.convexity() - k),
            lipschitz_bound: 2.0 * c + 2.0 * k,
            wasserstein_lipschitz: Some((amp, 1.0)),
            dissipativity: Some(Dissipativity { alpha: 3.0 * c, c1: -lin * lin / (4.0 * c), c2: 0.0 }),
            weak_dm_constant: None,
            lasry_lions: true,
        };
        Ok(Self { kernel, amp, well, constants })
    }

    fn conv(&self, x: f64, m: AtomView<'_>) -> (f64, f64) {
        let (mut v, mut g) = (0.0, 0.0);
        for (y, w) in m.iter() {
            let z = x - y[0];
            v += w * self.kernel.value(z);
            g += w * self.kernel.slope(z);
        }
        (self.amp * v, self.amp * g)
    }
}

impl LinearStatistics for Convolution {
    // sin(x − y) = sin x cos y − cos x sin y
    fn len(&self) -> usize {
        2
    }

    fn feature(&self, y: &[f64], out: &mut [f64]) {
        let (s, c) = y[0].sin_cos();
        out[0] = c;
        out[1] = s;
    }

    fn eval_stat(&self, x: &[f64], st: &[f64]) -> f64 {
        let (s, c) = x[0].sin_cos();
        self.amp * (s * st[0] - c * st[1]) + self.well.value(x[0])
    }

    fn grad_stat(&self, x: &[f64], st: &[f64], out: &mut [f64]) {
        let (s, c) = x[0].sin_cos();
        out[0] = self.amp * (c * st[0] + s * st[1]) + self.well.slope(x[0]);
    }
}

impl MeanFieldCost for Convolution {
    fn id(&self) -> String {
        let well = match self.well {
            Well::Quadratic { c } => format!("c={c}"),
            Well::Flat { c, half_width } => format!("c={c},well=flat,half_width={half_width}"),
        };
        format!("convolution(phi={},amp={},{well})", self.kernel.name(), self.amp)
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], m: AtomView<'_>) -> f64 {
        self.conv(x[0], m).0 + self.well.value(x[0])
    }

    fn grad_x(&self, x: &[f64], m: AtomView<'_>, out: &mut [f64]) {
        out[0] = self.conv(x[0], m).1 + self.well.slope(x[0]);
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        Some(self.amp * self.kernel.value(x[0] - y[0]) - self.conv(x[0], m).0)
    }

    fn lions_deriv(&self, x: &[f64], _m: AtomView<'_>, y: &[f64], out: &mut [f64]) -> bool {
        out[0] = -self.amp * self.kernel.slope(x[0] - y[0]);
        true
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn linear_statistics(&self) -> Option<&dyn LinearStatistics> {
        (self.kernel == Kernel::Sin).then_some(self as &dyn LinearStatistics)
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        match self.well {
            // φ'(0) = 1 for both kernels, so δ_z with amp + 2cz = 0 is critical;
            // F(·, δ_z) is convex when 2c > amp·sup|φ''|.
            Well::Quadratic { c } if self.constants.dm_constant > 0.0 => {
                DiscreteMeasure::dirac(&[-self.amp / (2.0 * c)]).ok()
            }
            // Uniform law on [−L, L] with L a multiple of π: ∫sin(x − y)dm(y) = 0,
            // so F(·, m) = g vanishes exactly on the support.
            Well::Flat { half_width, .. } if self.kernel == Kernel::Sin => {
                let k = (half_width / PI).round();
                if k < 1.0 || (half_width - k * PI).abs() > 1e-12 * half_width {
                    return None;
                }
                let atoms = 4096 * k as usize;
                let h = 2.0 * half_width / atoms as f64;
                let pts = (0..atoms).map(|j| -half_width + (j as f64 + 0.5) * h).collect();
                Some(DiscreteMeasure::uniform(1, pts).expect("valid uniform atoms"))
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Rank one

/// `F(x, m) = tanh(x)·∫tanh dm + x²/2`.
#[derive(Clone, Debug)]
pub struct RankOne {
    constants: CostConstants,
}

impl Default for RankOne {
    fn default() -> Self {
        Self::new()
    }
}

impl RankOne {
    pub fn new() -> Self {
        Self {
            constants: CostConstants {
                // ∂_x ∇F = 1 + tanh''(x)s, |s| ≤ 1; cross term |tanh'|·|tanh'| ≤ 1
                dm_constant: -TANH_CURVATURE,
                convexity_constant: Some(1.0 - TANH_CURVATURE),
                lipschitz_bound: 2.0 + TANH_CURVATURE,
                wasserstein_lipschitz: Some((1.0, 1.0)),
                // 2x(x + sech²x·s) ≥ 2x² − 2|x| ≥ x² − 1
                dissipativity: Some(Dissipativity { alpha: 1.0, c1: -1.0, c2: 0.0 }),
                weak_dm_constant: None,
                lasry_lions: true,
            },
        }
    }
}

impl LinearStatistics for RankOne {
    fn len(&self) -> usize {
        1
    }

    fn feature(&self, y: &[f64], out: &mut [f64]) {
        out[0] = y[0].tanh();
    }

    fn eval_stat(&self, x: &[f64], s: &[f64]) -> f64 {
        x[0].tanh() * s[0] + 0.5 * x[0] * x[0]
    }

    fn grad_stat(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        let c = x[0].cosh();
        out[0] = s[0] / (c * c) + x[0];
    }
}

impl MeanFieldCost for RankOne {
    linear_stat_cost!();

    fn id(&self) -> String {
        "rank_one(phi=tanh)".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        let s = self.average(m)[0];
        Some(x[0].tanh() * (y[0].tanh() - s))
    }

    fn lions_deriv(&self, x: &[f64], _m: AtomView<'_>, y: &[f64], out: &mut [f64]) -> bool {
        let c = y[0].cosh();
        out[0] = x[0].tanh() / (c * c);
        true
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        DiscreteMeasure::dirac(&[0.0]).ok()
    }
}

// ---------------------------------------------------------------------------
// Anti-convolution

/// `F(x, m) = C|x|² − β∫exp(−(x − y)²) m(dy)`.
///
/// The bump `βe^{−z²}` is positive definite, so `Γ_LL(m, m') = −β∫∫e^{−(x−y)²}
/// d(m−m')d(m−m') < 0` for `m ≠ m'`, while the quadratic part dominates the
/// bump's curvature and keeps the game displacement monotone.
#[derive(Clone, Debug)]
pub struct AntiConvolution {
    c: f64,
    beta: f64,
    constants: CostConstants,
}

impl AntiConvolution {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && beta > 0.0) {
            return invalid("anti_convolution needs C > 0 and beta > 0");
        }
        // Verify the curvature range of φ(z) = βe^{−z²} on a grid before use.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=200_000 {
            let z = -10.0 + j as f64 * 1e-4;
            let v = Self::curv(beta, z);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let k_plus = 4.0 * beta * (-1.5f64).exp();
        let k_minus = 2.0 * beta;
        if (hi - k_plus).abs() > 1e-8 || (lo + k_minus).abs() > 1e-8 {
            return invalid("anti_convolution curvature bounds failed the grid check");
        }
        if -c > lo {
            return invalid(format!("anti_convolution needs C >= 2 beta (C = {c}, beta = {beta})"));
        }
        let slope_max = beta * (2.0 / E).sqrt();
        let dm = 2.0 * c - k_plus;
        Ok(Self {
            c,
            beta,
            constants: CostConstants {
                dm_constant: dm,
                convexity_constant: Some(dm),
                lipschitz_bound: 2.0 * c + 2.0 * k_minus,
                wasserstein_lipschitz: Some((slope_max, 1.0)),
                dissipativity: Some(Dissipativity { alpha: 3.0 * c, c1: -slope_max * slope_max / c, c2: 0.0 }),
                weak_dm_constant: None,
                lasry_lions: false,
            },
        })
    }

    fn curv(beta: f64, z: f64) -> f64 {
        beta * (4.0 * z * z - 2.0) * (-z * z).exp()
    }
}

impl MeanFieldCost for AntiConvolution {
    fn id(&self) -> String {
        format!("anti_convolution(C={},beta={})", self.c, self.beta)
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], m: AtomView<'_>) -> f64 {
        let bump: f64 = m.iter().map(|(y, w)| w * (-(x[0] - y[0]).powi(2)).exp()).sum();
        self.c * x[0] * x[0] - self.beta * bump
    }

    fn grad_x(&self, x: &[f64], m: AtomView<'_>, out: &mut [f64]) {
        let g: f64 = m
            .iter()
            .map(|(y, w)| {
                let z = x[0] - y[0];
                w * 2.0 * z * (-z * z).exp()
            })
            .sum();
        out[0] = 2.0 * self.c * x[0] + self.beta * g;
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        let bump: f64 = m.iter().map(|(yy, w)| w * (-(x[0] - yy[0]).powi(2)).exp()).sum();
        Some(-self.beta * ((-(x[0] - y[0]).powi(2)).exp() - bump))
    }

    fn lions_deriv(&self, x: &[f64], _m: AtomView<'_>, y: &[f64], out: &mut [f64]) -> bool {
        let z = x[0] - y[0];
        out[0] = -self.beta * 2.0 * z * (-z * z).exp();
        true
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        DiscreteMeasure::dirac(&[0.0]).ok()
    }
}

// ---------------------------------------------------------------------------
// Weakly displacement monotone

/// `F(x, m) = κ(x − m̄)²/2 + ψ(m̄)x` with `ψ(y) = sign(y)log(1 + |y|)`.
///
/// `Γ_DM = κE|δx − δm̄|² + δm̄·δψ` and `δm̄·δψ ≥ |δm̄|²/(1 + |m̄| ∨ |m̄'|)`, so the
/// game is weakly displacement monotone with `c_F = min(κ, 1)` but not
/// uniformly: the mean mode contracts at a rate that vanishes as `|m̄| → ∞`.
#[derive(Clone, Debug)]
pub struct WeakDm {
    kappa: f64,
    constants: CostConstants,
}

impl WeakDm {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return invalid(format!("weak_dm needs kappa > 0, got {kappa}"));
        }
        Ok(Self {
            kappa,
            constants: CostConstants {
                dm_constant: 0.0,
                convexity_constant: Some(kappa),
                lipschitz_bound: 2.0 * kappa + 1.0,
                wasserstein_lipschitz: None,
                dissipativity: None,
                weak_dm_constant: Some(kappa.min(1.0)),
                lasry_lions: false,
            },
        })
    }

    fn psi(y: f64) -> f64 {
        y.signum() * y.abs().ln_1p()
    }
}

impl LinearStatistics for WeakDm {
    fn len(&self) -> usize {
        1
    }

    fn feature(&self, y: &[f64], out: &mut [f64]) {
        out[0] = y[0];
    }

    fn eval_stat(&self, x: &[f64], s: &[f64]) -> f64 {
        let u = x[0] - s[0];
        0.5 * self.kappa * u * u + Self::psi(s[0]) * x[0]
    }

    fn grad_stat(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        out[0] = self.kappa * (x[0] - s[0]) + Self::psi(s[0]);
    }
}

impl MeanFieldCost for WeakDm {
    linear_stat_cost!();

    fn id(&self) -> String {
        format!("weak_dm(kappa={})", self.kappa)
    }

    fn dim(&self) -> usize {
        1
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        DiscreteMeasure::dirac(&[0.0]).ok()
    }
}

// ---------------------------------------------------------------------------
// sin·cos

/// `F(x, m) = x² + sin(x)∫cos dm`; its two-player symmetrization is
/// [`sincos2p`].
#[derive(Clone, Debug)]
pub struct SinCos {
    constants: CostConstants,
}

impl Default for SinCos {
    fn default() -> Self {
        Self::new()
    }
}

impl SinCos {
    pub fn new() -> Self {
        Self {
            constants: CostConstants {
                // ∂²_x F = 2 − sin(x)s ≥ 1; cross term cos(x)sin(y) bounded by 1
                dm_constant: 0.0,
                convexity_constant: Some(1.0),
                lipschitz_bound: 4.0,
                wasserstein_lipschitz: Some((1.0, 1.0)),
                // 2x(2x + cos x·s) ≥ 4x² − 2|x| ≥ 3x² − 1
                dissipativity: Some(Dissipativity { alpha: 3.0, c1: -1.0, c2: 0.0 }),
                weak_dm_constant: None,
                lasry_lions: false,
            },
        }
    }
}

impl LinearStatistics for SinCos {
    fn len(&self) -> usize {
        1
    }

    fn feature(&self, y: &[f64], out: &mut [f64]) {
        out[0] = y[0].cos();
    }

    fn eval_stat(&self, x: &[f64], s: &[f64]) -> f64 {
        x[0] * x[0] + x[0].sin() * s[0]
    }

    fn grad_stat(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * x[0] + x[0].cos() * s[0];
    }
}

impl MeanFieldCost for SinCos {
    linear_stat_cost!();

    fn id(&self) -> String {
        "sincos".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        let s = self.average(m)[0];
        Some(x[0].sin() * (y[0].cos() - s))
    }

    fn lions_deriv(&self, x: &[f64], _m: AtomView<'_>, y: &[f64], out: &mut [f64]) -> bool {
        out[0] = -x[0].sin() * y[0].sin();
        true
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }
}

/// The two-player game `F₁(x, y) = x² + sin(x)cos(y)`, `F₂(x, y) = y² + sin(y)cos(x)`.
pub fn sincos2p() -> FinitePlayerGame {
    FinitePlayerGame::new(
        "sincos2p",
        2,
        1,
        4.0,
        |i, p| {
            let (u, v) = if i == 0 { (p[0], p[1]) } else { (p[1], p[0]) };
            u * u + u.sin() * v.cos()
        },
        |i, p, out| {
            let (u, v) = if i == 0 { (p[0], p[1]) } else { (p[1], p[0]) };
            out[0] = 2.0 * u + u.cos() * v.cos();
        },
    )
    .expect("two players in one dimension")
}

// ---------------------------------------------------------------------------
// Potentials

/// `U(x) = |x|²/2 + (d/2)log 2π`; `e^{−U}` is the standard Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianPotential {
    dim: usize,
}

impl GaussianPotential {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }
}

impl Potential for GaussianPotential {
    fn id(&self) -> String {
        "gaussian".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x) + self.log_normalizer()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x)
    }

    fn convexity_constant(&self) -> f64 {
        1.0
    }

    fn dissipativity(&self) -> (f64, f64) {
        (2.0, 0.0)
    }

    fn log_normalizer(&self) -> f64 {
        0.5 * self.dim as f64 * (2.0 * PI).ln()
    }

    fn quadratic_stiffness(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `log ∫ e^{−u(x)} dx` over `[−l, l]` by composite Simpson.
fn log_integral(u: impl Fn(f64) -> f64, l: f64, intervals: usize) -> f64 {
    let h = 2.0 * l / intervals as f64;
    let mut s = 0.0;
    for j in 0..=intervals {
        let w = if j == 0 || j == intervals {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * (-u(-l + j as f64 * h)).exp();
    }
    (s * h / 3.0).ln()
}

/// `U(x) = √(1 + x²) + log Z`: convex with `ℓ_U = 0`, linear tails.
#[derive(Clone, Debug)]
pub struct SoftAbsPotential {
    log_z: f64,
}

impl Default for SoftAbsPotential {
    fn default() -> Self {
        Self::new()
    }
}

impl SoftAbsPotential {
    pub fn new() -> Self {
        Self { log_z: log_integral(|x| (1.0 + x * x).sqrt(), 60.0, 240_000) }
    }
}

impl Potential for SoftAbsPotential {
    fn id(&self) -> String {
        "soft_abs".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (1.0 + x[0] * x[0]).sqrt() + self.log_z
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] / (1.0 + x[0] * x[0]).sqrt();
    }

    fn convexity_constant(&self) -> f64 {
        0.0
    }

    fn dissipativity(&self) -> (f64, f64) {
        // 2x²/√(1+x²) ≥ 0
        (0.0, 0.0)
    }

    fn log_normalizer(&self) -> f64 {
        self.log_z
    }
}

/// Double well `U(x) = x⁴/4 − x²/2 + log Z` with `ℓ_U = −1`.
#[derive(Clone, Debug)]
pub struct QuarticPotential {
    log_z: f64,
}

impl Default for QuarticPotential {
    fn default() -> Self {
        Self::new()
    }
}

impl QuarticPotential {
    pub fn new() -> Self {
        Self { log_z: log_integral(|x| 0.25 * x.powi(4) - 0.5 * x * x, 12.0, 48_000) }
    }
}

impl Potential for QuarticPotential {
    fn id(&self) -> String {
        "double_well".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64 {
        0.25 * x[0].powi(4) - 0.5 * x[0] * x[0] + self.log_z
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0].powi(3) - x[0];
    }

    fn convexity_constant(&self) -> f64 {
        -1.0
    }

    fn dissipativity(&self) -> (f64, f64) {
        // 2x⁴ − 2x² ≥ 2x² − 2
        (2.0, -2.0)
    }

    fn log_normalizer(&self) -> f64 {
        self.log_z
    }
}
