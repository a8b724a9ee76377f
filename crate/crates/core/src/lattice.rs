//! Torus geometry, sampled fields, and exact trigonometric polynomials.
//!
//! Lattice sites are embedded in the unit torus as `x = (i_1, ..., i_d) / n`
//! and indexed row-major with the last coordinate fastest.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Discrete torus with `n` sites per axis in `d` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Torus {
    d: usize,
    n: usize,
}

impl Torus {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("need at least 2 sites per axis".into()));
        }
        n.checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("n^d overflows for n={n}, d={d}")))?;
        Ok(Self { d, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Index step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Row-major site id; out-of-range coordinates wrap periodically.
    pub fn site_index(&self, coords: &[i64]) -> usize {
        assert_eq!(coords.len(), self.d, "coordinate length must equal dimension");
        let n = self.n as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        let mut rest = site;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.n;
            rest /= self.n;
        }
        out
    }

    /// Embedded position of a site in `[0, 1)^d`.
    pub fn point(&self, site: usize) -> Vec<f64> {
        let h = self.spacing();
        self.coords(site).into_iter().map(|c| c as f64 * h).collect()
    }

    /// Neighbor of `site` one step along `axis`, forward or backward, with wrap.
    #[inline]
    pub fn neighbor(&self, site: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.n;
        if forward {
            if c + 1 == self.n {
                site + stride - self.n * stride
            } else {
                site + stride
            }
        } else if c == 0 {
            site + (self.n - 1) * stride
        } else {
            site - stride
        }
    }

    /// Site of `-x` (coordinate-wise negation mod n).
    pub fn reflect(&self, site: usize) -> usize {
        let neg: Vec<i64> = self.coords(site).iter().map(|&c| -(c as i64)).collect();
        self.site_index(&neg)
    }
}

/// Real field sampled on every site of a torus, with one or more components.
///
/// Component `j` occupies `values[j * sites .. (j + 1) * sites]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    torus: Torus,
    components: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(torus: Torus, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidArgument("field needs at least one component".into()));
        }
        if values.len() != torus.sites() * components {
            return Err(Error::InvalidArgument(format!(
                "field length {} does not match {} sites x {} components",
                values.len(),
                torus.sites(),
                components
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field entry at index {i}")));
        }
        Ok(Self {
            torus,
            components,
            values,
        })
    }

    pub fn scalar(torus: Torus, values: Vec<f64>) -> Result<Self> {
        Self::new(torus, 1, values)
    }

    pub fn zeros(torus: Torus, components: usize) -> Self {
        Self {
            torus,
            components,
            values: vec![0.0; torus.sites() * components],
        }
    }

    pub fn from_fn(torus: Torus, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..torus.sites()).map(|s| f(&torus.point(s))).collect();
        Self {
            torus,
            components: 1,
            values,
        }
    }

    /// Samples a trigonometric polynomial at the embedded lattice points.
    pub fn sample(torus: Torus, expr: &TrigExpr) -> Self {
        Self::from_fn(torus, |x| expr.eval(x))
    }

    #[inline]
    pub fn torus(&self) -> Torus {
        self.torus
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, j: usize) -> &[f64] {
        let s = self.torus.sites();
        &self.values[j * s..(j + 1) * s]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        let s = self.torus.sites();
        &mut self.values[j * s..(j + 1) * s]
    }

    /// `n^{-d} * sum_x f(x)` over the first component.
    pub fn riemann_mean(&self) -> f64 {
        riemann_mean(self)
    }

    /// `n^{-d} * sum_x f(x) g(x)` over the first components.
    pub fn lattice_pairing(&self, other: &GridField) -> f64 {
        assert_eq!(self.torus, other.torus);
        let s = self.torus.sites();
        let sum: f64 = self.values[..s]
            .iter()
            .zip(&other.values[..s])
            .map(|(a, b)| a * b)
            .sum();
        sum / s as f64
    }

    pub fn sup_distance(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Lattice mean `n^{-d} sum_x f(x)` of a scalar field.
pub fn riemann_mean(field: &GridField) -> f64 {
    let s = field.torus.sites();
    field.values[..s].iter().sum::<f64>() / s as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    Const,
    Cos,
    Sin,
}

/// One term `a * cos(2 pi k.x)`, `a * sin(2 pi k.x)`, or the constant `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub kind: TermKind,
    /// Integer wave vector; empty for constants.
    pub mode: Vec<i64>,
    pub amplitude: f64,
}

impl TrigTerm {
    pub fn constant(a: f64) -> Self {
        Self {
            kind: TermKind::Const,
            mode: Vec::new(),
            amplitude: a,
        }
    }

    pub fn cos(mode: Vec<i64>, a: f64) -> Self {
        Self {
            kind: TermKind::Cos,
            mode,
            amplitude: a,
        }
    }

    pub fn sin(mode: Vec<i64>, a: f64) -> Self {
        Self {
            kind: TermKind::Sin,
            mode,
            amplitude: a,
        }
    }

    #[inline]
    fn phase(&self, x: &[f64]) -> f64 {
        TWO_PI * self.mode.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>()
    }

    /// `|k|^2`.
    pub fn mode_norm_sq(&self) -> f64 {
        self.mode.iter().map(|&k| (k * k) as f64).sum()
    }

    fn is_zero_mode(&self) -> bool {
        self.mode.iter().all(|&k| k == 0)
    }

    /// Whether the term is a constant function (including `cos` at `k = 0`).
    pub fn is_constant(&self) -> bool {
        match self.kind {
            TermKind::Const => true,
            TermKind::Cos | TermKind::Sin => self.is_zero_mode(),
        }
    }

    fn constant_value(&self) -> f64 {
        match self.kind {
            TermKind::Const => self.amplitude,
            TermKind::Cos if self.is_zero_mode() => self.amplitude,
            _ => 0.0,
        }
    }
}

/// Exact trigonometric polynomial on the unit torus.
///
/// Grammar: terms joined by `+`, each `const:a`, `cos:k1,..,kd:a`, or
/// `sin:k1,..,kd:a`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigExpr {
    terms: Vec<TrigTerm>,
}

impl TrigExpr {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    pub fn constant(a: f64) -> Self {
        Self::new(vec![TrigTerm::constant(a)])
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    /// Spatial dimension implied by the mode vectors, if any term carries one.
    pub fn implied_dim(&self) -> Option<usize> {
        self.terms
            .iter()
            .find(|t| t.kind != TermKind::Const)
            .map(|t| t.mode.len())
    }

    /// Rejects mode vectors whose length differs from `d`.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        for t in &self.terms {
            if t.kind != TermKind::Const && t.mode.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "mode {:?} has length {}, expected dimension {d}",
                    t.mode,
                    t.mode.len()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| match t.kind {
                TermKind::Const => t.amplitude,
                TermKind::Cos => t.amplitude * t.phase(x).cos(),
                TermKind::Sin => t.amplitude * t.phase(x).sin(),
            })
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            let s = match t.kind {
                TermKind::Const => continue,
                TermKind::Cos => -t.amplitude * t.phase(x).sin(),
                TermKind::Sin => t.amplitude * t.phase(x).cos(),
            };
            for (gj, &k) in g.iter_mut().zip(&t.mode) {
                *gj += TWO_PI * k as f64 * s;
            }
        }
        g
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let w = -(TWO_PI * TWO_PI) * t.mode_norm_sq();
                match t.kind {
                    TermKind::Const => 0.0,
                    TermKind::Cos => w * t.amplitude * t.phase(x).cos(),
                    TermKind::Sin => w * t.amplitude * t.phase(x).sin(),
                }
            })
            .sum()
    }

    /// Exact integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.terms.iter().map(TrigTerm::constant_value).sum()
    }

    /// Exact `L^2` pairing `int f g dx`.
    pub fn inner(&self, other: &TrigExpr) -> f64 {
        let mut total = 0.0;
        for a in &self.terms {
            for b in &other.terms {
                total += a.amplitude * b.amplitude * term_product_mean(a, b);
            }
        }
        total
    }

    /// Largest absolute mode component over all terms.
    pub fn max_mode(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.mode.iter())
            .map(|k| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Constant part `c` and the sum of non-constant amplitudes `sum |a|`.
    pub fn constant_and_spread(&self) -> (f64, f64) {
        let c = self.mean();
        let spread = self
            .terms
            .iter()
            .filter(|t| !t.is_constant())
            .map(|t| t.amplitude.abs())
            .sum();
        (c, spread)
    }

    /// Guaranteed range `[c - sum|a|, c + sum|a|]`.
    pub fn range_bound(&self) -> (f64, f64) {
        let (c, s) = self.constant_and_spread();
        (c - s, c + s)
    }

    /// True when the coefficient bound places the expression inside `[0, 1]`.
    pub fn is_unit_profile(&self) -> bool {
        let (lo, hi) = self.range_bound();
        lo >= 0.0 && hi <= 1.0
    }

    /// Minimum over an equispaced grid fine enough to resolve every mode.
    pub fn sampled_min(&self, d: usize) -> f64 {
        let per_axis = (16 * self.max_mode()).max(16);
        let torus = Torus::new(d, per_axis).expect("valid sampling torus");
        GridField::sample(torus, self)
            .values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Multiplies each term's amplitude by `f(term)`.
    pub fn map_amplitudes(&self, mut f: impl FnMut(&TrigTerm) -> f64) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|t| TrigTerm {
                    amplitude: t.amplitude * f(t),
                    ..t.clone()
                })
                .collect(),
        )
    }

    /// Coefficient-wise equality up to `tol`, after merging like terms.
    pub fn approx_eq(&self, other: &TrigExpr, tol: f64) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol)
    }

    fn canonical(&self) -> Vec<((u8, Vec<i64>), f64)> {
        let mut out: Vec<((u8, Vec<i64>), f64)> = Vec::new();
        for t in &self.terms {
            let key = match t.kind {
                _ if t.is_constant() => (0u8, Vec::new()),
                TermKind::Cos => (1, t.mode.clone()),
                TermKind::Sin => (2, t.mode.clone()),
                TermKind::Const => unreachable!(),
            };
            // cos(-k) = cos(k), sin(-k) = -sin(k)
            let (key, sign) = canonical_sign(key);
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some(slot) => slot.1 += sign * t.amplitude,
                None => out.push((key, sign * t.amplitude)),
            }
        }
        out.retain(|(_, a)| *a != 0.0);
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

fn canonical_sign(key: (u8, Vec<i64>)) -> ((u8, Vec<i64>), f64) {
    let (tag, mode) = key;
    let first_nonzero = mode.iter().copied().find(|&k| k != 0).unwrap_or(0);
    if first_nonzero < 0 {
        let flipped = mode.iter().map(|k| -k).collect();
        let sign = if tag == 2 { -1.0 } else { 1.0 };
        ((tag, flipped), sign)
    } else {
        ((tag, mode), 1.0)
    }
}

/// Mean of the product of two unit-amplitude terms.
fn term_product_mean(a: &TrigTerm, b: &TrigTerm) -> f64 {
    // Constants behave as cos at k = 0.
    let as_cos = |t: &TrigTerm| -> (bool, Vec<i64>) {
        match t.kind {
            TermKind::Const => (true, Vec::new()),
            TermKind::Cos => (true, t.mode.clone()),
            TermKind::Sin => (false, t.mode.clone()),
        }
    };
    let (ca, ka) = as_cos(a);
    let (cb, kb) = as_cos(b);
    let len = ka.len().max(kb.len());
    let get = |k: &Vec<i64>, i: usize| k.get(i).copied().unwrap_or(0);
    let diff_zero = (0..len).all(|i| get(&ka, i) == get(&kb, i));
    let sum_zero = (0..len).all(|i| get(&ka, i) + get(&kb, i) == 0);
    let ind = |z: bool| if z { 1.0 } else { 0.0 };
    match (ca, cb) {
        // cos a cos b = (cos(a-b) + cos(a+b)) / 2
        (true, true) => 0.5 * (ind(diff_zero) + ind(sum_zero)),
        // sin a sin b = (cos(a-b) - cos(a+b)) / 2
        (false, false) => 0.5 * (ind(diff_zero) - ind(sum_zero)),
        _ => 0.0,
    }
}

impl fmt::Display for TrigExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "const:0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            let modes = || {
                t.mode
                    .iter()
                    .map(i64::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            };
            match t.kind {
                TermKind::Const => write!(f, "const:{}", t.amplitude)?,
                TermKind::Cos => write!(f, "cos:{}:{}", modes(), t.amplitude)?,
                TermKind::Sin => write!(f, "sin:{}:{}", modes(), t.amplitude)?,
            }
        }
        Ok(())
    }
}

impl FromStr for TrigExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::TrigParse {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let terms = split_terms(s)
            .into_iter()
            .map(|(offset, raw)| parse_term(raw, offset))
            .collect::<Result<Vec<_>>>()?;
        let dims: Vec<usize> = terms
            .iter()
            .filter(|t| t.kind != TermKind::Const)
            .map(|t| t.mode.len())
            .collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::TrigParse {
                position: 0,
                message: "terms disagree on dimension".into(),
            });
        }
        Ok(Self { terms })
    }
}

/// Splits on `+` separators, skipping exponent signs such as `1e+3`.
fn split_terms(s: &str) -> Vec<(usize, &str)> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'+' {
            let prev = if i > 0 { bytes[i - 1] } else { b' ' };
            let is_exponent = (prev == b'e' || prev == b'E')
                && i >= 2
                && (bytes[i - 2].is_ascii_digit() || bytes[i - 2] == b'.');
            if !is_exponent {
                out.push((start, &s[start..i]));
                start = i + 1;
            }
        }
    }
    out.push((start, &s[start..]));
    out
}

fn parse_term(raw: &str, offset: usize) -> Result<TrigTerm> {
    let lead = raw.len() - raw.trim_start().len();
    let pos = offset + lead;
    let term = raw.trim();
    let err = |message: String| Error::TrigParse {
        position: pos,
        message,
    };
    let parts: Vec<&str> = term.split(':').map(str::trim).collect();
    let amplitude = |s: &str| -> Result<f64> {
        let a: f64 = s
            .parse()
            .map_err(|_| err(format!("bad amplitude `{s}` in term `{term}`")))?;
        if a.is_finite() {
            Ok(a)
        } else {
            Err(err(format!("non-finite amplitude in term `{term}`")))
        }
    };
    match parts.as_slice() {
        ["const", a] => Ok(TrigTerm::constant(amplitude(a)?)),
        [kind @ ("cos" | "sin"), modes, a] => {
            let mode = modes
                .split(',')
                .map(|k| {
                    k.trim()
                        .parse::<i64>()
                        .map_err(|_| err(format!("bad mode `{k}` in term `{term}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let a = amplitude(a)?;
            Ok(if *kind == "cos" {
                TrigTerm::cos(mode, a)
            } else {
                TrigTerm::sin(mode, a)
            })
        }
        _ => Err(err(format!("unrecognized term `{term}`"))),
    }
}
