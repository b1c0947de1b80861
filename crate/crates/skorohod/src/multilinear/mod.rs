//! Symmetric multilinear forms and polynomials on R^n.
//!
//! A polynomial of degree `d` is stored as forms `B_0..B_d`, each a symmetric
//! `j`-linear function kept sparsely on sorted multi-indices; the full
//! symmetric tensor is never materialized, multinomial weights are applied at
//! evaluation time.

mod norm;

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use norm::{NormEstimate, NormOptions};

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: u32, dim: usize },
    #[error("form of degree {degree} takes {degree} arguments, got {got}")]
    WrongArity { degree: usize, got: usize },
    #[error("multi-index length {got} does not match form degree {degree}")]
    BadMultiIndex { degree: usize, got: usize },
    #[error("form at position {position} must have degree {position}")]
    DegreeOrder { position: usize },
    #[error("polynomial needs at least one form")]
    Empty,
    #[error("leading form is identically zero")]
    ZeroLeadingForm,
}

/// Symmetric `j`-linear form, stored as `sorted multi-index -> value on the
/// corresponding basis tuple`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricForm {
    degree: usize,
    dim: usize,
    entries: BTreeMap<Vec<u32>, f64>,
}

fn multinomial(index: &[u32]) -> f64 {
    let mut fact = 1.0;
    for k in 1..=index.len() {
        fact *= k as f64;
    }
    let mut run = 1usize;
    let mut denom = 1.0;
    for i in 1..=index.len() {
        if i < index.len() && index[i] == index[i - 1] {
            run += 1;
        } else {
            for k in 1..=run {
                denom *= k as f64;
            }
            run = 1;
        }
    }
    fact / denom
}

/// Visit every distinct arrangement of a sorted multiset.
fn for_each_arrangement<F: FnMut(&[u32])>(sorted: &[u32], f: &mut F) {
    fn rec<F: FnMut(&[u32])>(sorted: &[u32], used: &mut [bool], cur: &mut Vec<u32>, f: &mut F) {
        if cur.len() == sorted.len() {
            f(cur);
            return;
        }
        let mut prev: Option<u32> = None;
        for i in 0..sorted.len() {
            if used[i] || prev == Some(sorted[i]) {
                continue;
            }
            prev = Some(sorted[i]);
            used[i] = true;
            cur.push(sorted[i]);
            rec(sorted, used, cur, f);
            cur.pop();
            used[i] = false;
        }
    }
    let mut used = vec![false; sorted.len()];
    let mut cur = Vec::with_capacity(sorted.len());
    rec(sorted, &mut used, &mut cur, f);
}

impl SymmetricForm {
    /// Build from `(multi-index, value)` pairs; indices are sorted and
    /// repeated pairs accumulate.
    pub fn new(degree: usize, dim: usize, entries: Vec<(Vec<u32>, f64)>) -> Result<Self, Error> {
        let mut map = BTreeMap::new();
        for (mut idx, v) in entries {
            if idx.len() != degree {
                return Err(Error::BadMultiIndex {
                    degree,
                    got: idx.len(),
                });
            }
            for &i in &idx {
                if i as usize >= dim {
                    return Err(Error::IndexOutOfRange { index: i, dim });
                }
            }
            idx.sort_unstable();
            *map.entry(idx).or_insert(0.0) += v;
        }
        Ok(Self {
            degree,
            dim,
            entries: map,
        })
    }

    pub fn zero(degree: usize, dim: usize) -> Self {
        Self {
            degree,
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| *v == 0.0)
    }

    /// Full multilinear evaluation `B(x_1, ..., x_j)`.
    pub fn eval(&self, args: &[&[f64]]) -> Result<f64, Error> {
        if args.len() != self.degree {
            return Err(Error::WrongArity {
                degree: self.degree,
                got: args.len(),
            });
        }
        for a in args {
            if a.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: a.len(),
                });
            }
        }
        if self.degree == 0 {
            return Ok(self.entries.get(&Vec::new()).copied().unwrap_or(0.0));
        }
        let mut acc = 0.0;
        for (idx, &v) in &self.entries {
            if v == 0.0 {
                continue;
            }
            let mut sym = 0.0;
            for_each_arrangement(idx, &mut |arr| {
                let mut prod = 1.0;
                for (slot, &coord) in arr.iter().enumerate() {
                    prod *= args[slot][coord as usize];
                }
                sym += prod;
            });
            acc += v * sym;
        }
        Ok(acc)
    }

    /// Diagonal value `B(x, ..., x)`.
    pub fn diag(&self, x: &[f64]) -> f64 {
        if self.degree == 0 {
            return self.entries.get(&Vec::new()).copied().unwrap_or(0.0);
        }
        let mut acc = 0.0;
        for (idx, &v) in &self.entries {
            let mut prod = 1.0;
            for &i in idx {
                prod *= x[i as usize];
            }
            acc += v * multinomial(idx) * prod;
        }
        acc
    }

    /// Gradient of the diagonal; `grad . theta` equals
    /// `degree * B(x, ..., x, theta)`.
    pub fn diag_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim];
        if self.degree == 0 {
            return grad;
        }
        for (idx, &v) in &self.entries {
            let w = v * multinomial(idx);
            if w == 0.0 {
                continue;
            }
            let mut i = 0;
            while i < idx.len() {
                let d = idx[i] as usize;
                let mut run = 1;
                while i + run < idx.len() && idx[i + run] as usize == d {
                    run += 1;
                }
                let mut prod = run as f64 * w * x[d].powi(run as i32 - 1);
                for &other in idx.iter() {
                    if other as usize != d {
                        prod *= x[other as usize];
                    }
                }
                grad[d] += prod;
                i += run;
            }
        }
        grad
    }
}

/// Polynomial `f(x) = sum_j B_j(x, ..., x)` with a nonzero leading form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPolynomial {
    dim: usize,
    forms: Vec<SymmetricForm>,
}

impl SymmetricPolynomial {
    pub fn new(dim: usize, forms: Vec<SymmetricForm>) -> Result<Self, Error> {
        if forms.is_empty() {
            return Err(Error::Empty);
        }
        for (j, f) in forms.iter().enumerate() {
            if f.degree() != j {
                return Err(Error::DegreeOrder { position: j });
            }
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        if forms.len() > 1 && forms.last().unwrap().is_zero() {
            return Err(Error::ZeroLeadingForm);
        }
        Ok(Self { dim, forms })
    }

    /// Build from monomials `(powers, coeff)` with `powers[i]` the exponent
    /// of `x_i`.
    pub fn from_monomials(dim: usize, monomials: &[(Vec<u32>, f64)]) -> Result<Self, Error> {
        let degree = monomials
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(p, _)| p.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0);
        let mut per_degree: Vec<Vec<(Vec<u32>, f64)>> = vec![Vec::new(); degree + 1];
        for (powers, coeff) in monomials {
            if powers.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: powers.len(),
                });
            }
            if *coeff == 0.0 {
                continue;
            }
            let j = powers.iter().sum::<u32>() as usize;
            let mut idx = Vec::with_capacity(j);
            for (var, &p) in powers.iter().enumerate() {
                for _ in 0..p {
                    idx.push(var as u32);
                }
            }
            // On the diagonal the entry picks up a multinomial factor; divide
            // it out so the monomial coefficient is reproduced exactly.
            let v = *coeff / multinomial(&idx);
            per_degree[j].push((idx, v));
        }
        let forms = per_degree
            .into_iter()
            .enumerate()
            .map(|(j, entries)| SymmetricForm::new(j, dim, entries))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, forms)
    }

    /// Univariate polynomial with ascending coefficients.
    pub fn univariate(coeffs: &[f64]) -> Result<Self, Error> {
        let monomials: Vec<(Vec<u32>, f64)> = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| (vec![k as u32], c))
            .collect();
        Self::from_monomials(1, &monomials)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.forms.len() - 1
    }

    pub fn forms(&self) -> &[SymmetricForm] {
        &self.forms
    }

    pub fn leading_form(&self) -> &SymmetricForm {
        self.forms.last().unwrap()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, Error> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.forms.iter().map(|f| f.diag(x)).sum())
    }

    /// Gradient of `f` at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut grad = vec![0.0; self.dim];
        for f in &self.forms {
            for (g, d) in grad.iter_mut().zip(f.diag_grad(x)) {
                *g += d;
            }
        }
        Ok(grad)
    }

    /// Directional derivative `sum_j j B_j(x, ..., x, theta)`.
    pub fn dir_deriv(&self, x: &[f64], theta: &[f64]) -> Result<f64, Error> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let grad = self.gradient(x)?;
        Ok(grad.iter().zip(theta).map(|(g, t)| g * t).sum())
    }

    /// Ascending coefficients when the polynomial lives on the line.
    pub fn to_univariate(&self) -> Option<Vec<f64>> {
        if self.dim != 1 {
            return None;
        }
        Some(self.forms.iter().map(|f| f.diag(&[1.0])).collect())
    }

    /// Same polynomial plus a constant.
    pub fn shift_constant(&self, c: f64) -> Self {
        let mut forms = self.forms.clone();
        let e = forms[0].entries.entry(Vec::new()).or_insert(0.0);
        *e += c;
        Self {
            dim: self.dim,
            forms,
        }
    }

    /// Norm of the leading form: exact for degrees one and two, a certified
    /// sphere-ascent lower bound above.
    pub fn leading_form_norm(&self, opts: &NormOptions) -> Result<NormEstimate, Error> {
        norm::leading_form_norm(self.leading_form(), opts)
    }
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    idx: Vec<u32>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct RawForm {
    degree: usize,
    entries: Vec<RawEntry>,
}

impl Serialize for SymmetricPolynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            dim: usize,
            degree: usize,
            forms: Vec<RawFormRef<'a>>,
        }
        #[derive(Serialize)]
        struct RawFormRef<'a> {
            degree: usize,
            entries: Vec<RawEntryRef<'a>>,
        }
        #[derive(Serialize)]
        struct RawEntryRef<'a> {
            idx: &'a [u32],
            coeff: f64,
        }
        Raw {
            dim: self.dim,
            degree: self.degree(),
            forms: self
                .forms
                .iter()
                .map(|f| RawFormRef {
                    degree: f.degree,
                    entries: f
                        .entries
                        .iter()
                        .map(|(idx, &coeff)| RawEntryRef { idx, coeff })
                        .collect(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymmetricPolynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct RawMonomial {
            powers: Vec<u32>,
            coeff: f64,
        }
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            #[serde(default)]
            degree: Option<usize>,
            #[serde(default)]
            forms: Option<Vec<RawForm>>,
            #[serde(default)]
            monomials: Option<Vec<RawMonomial>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let poly = match (raw.forms, raw.monomials) {
            (Some(forms), None) => {
                let max_degree = forms.iter().map(|f| f.degree).max().unwrap_or(0);
                let mut ordered = vec![Vec::new(); max_degree + 1];
                for f in forms {
                    ordered[f.degree].extend(f.entries.into_iter().map(|e| (e.idx, e.coeff)));
                }
                let forms = ordered
                    .into_iter()
                    .enumerate()
                    .map(|(j, entries)| SymmetricForm::new(j, raw.dim, entries))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(D::Error::custom)?;
                SymmetricPolynomial::new(raw.dim, forms).map_err(D::Error::custom)?
            }
            (None, Some(monomials)) => {
                let ms: Vec<(Vec<u32>, f64)> =
                    monomials.into_iter().map(|m| (m.powers, m.coeff)).collect();
                SymmetricPolynomial::from_monomials(raw.dim, &ms).map_err(D::Error::custom)?
            }
            _ => {
                return Err(D::Error::custom(
                    "polynomial wants exactly one of `forms` or `monomials`",
                ))
            }
        };
        if let Some(d) = raw.degree {
            if d != poly.degree() {
                return Err(D::Error::custom(format!(
                    "declared degree {d} but forms give {}",
                    poly.degree()
                )));
            }
        }
        Ok(poly)
    }
}
