//! The Heisenberg group in real coordinates `(x, y, t)`, its norms,
//! dilations and left-invariant vector fields.
//!
//! Product: `(x,y,t)·(x',y',t') = (x+x', y+y', t+t' + 2<y,x'> - 2<x,y'>)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Central-difference step used when a symbol has no analytic partials.
pub const H_FD: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `max(|z|, |t|^{1/2})`
    RhoMax,
    /// `max(|x_i|, |y_i|, |t|^{1/2})`
    Gauge,
    /// `(|z|^4 + t^2)^{1/4}`
    Koranyi,
}

impl GroupElement {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(Self { x, y, t })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            t: 0.0,
        }
    }

    /// Convenience constructor for `n = 1`.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        Self {
            x: vec![x],
            y: vec![y],
            t,
        }
    }

    /// Builds from the flat layout `[x_1..x_n, y_1..y_n, t]`.
    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() < 3 || v.len().is_multiple_of(2) {
            return Err(Error::Inconsistent(format!(
                "flat coordinate vector of length {}",
                v.len()
            )));
        }
        let n = (v.len() - 1) / 2;
        Ok(Self {
            x: v[..n].to_vec(),
            y: v[n..2 * n].to_vec(),
            t: v[2 * n],
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n() + 1);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.push(self.t);
        v
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_origin(&self) -> bool {
        self.t == 0.0 && self.x.iter().chain(&self.y).all(|&c| c == 0.0)
    }

    /// `|z|^2 = sum x_i^2 + y_i^2`
    pub fn z_norm_sq(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|c| c * c).sum()
    }

    pub fn rho(&self) -> f64 {
        self.z_norm_sq().sqrt().max(self.t.abs().sqrt())
    }

    pub fn gauge_norm(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .fold(self.t.abs().sqrt(), |m, c| m.max(c.abs()))
    }

    pub fn koranyi_norm(&self) -> f64 {
        let r2 = self.z_norm_sq();
        (r2 * r2 + self.t * self.t).sqrt().sqrt()
    }

    pub fn norm(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::RhoMax => self.rho(),
            MetricKind::Gauge => self.gauge_norm(),
            MetricKind::Koranyi => self.koranyi_norm(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| -v).collect(),
            t: -self.t,
        }
    }

    pub fn multiply(&self, h: &Self) -> Result<Self> {
        check_dim(self, h)?;
        Ok(self.mul_unchecked(h))
    }

    pub(crate) fn mul_unchecked(&self, h: &Self) -> Self {
        let n = self.n();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut t = self.t + h.t;
        for i in 0..n {
            x.push(self.x[i] + h.x[i]);
            y.push(self.y[i] + h.y[i]);
            t += 2.0 * (self.y[i] * h.x[i] - self.x[i] * h.y[i]);
        }
        Self { x, y, t }
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveDilation(lambda));
        }
        Ok(self.dilate_unchecked(lambda))
    }

    pub(crate) fn dilate_unchecked(&self, lambda: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| lambda * v).collect(),
            y: self.y.iter().map(|v| lambda * v).collect(),
            t: lambda * lambda * self.t,
        }
    }

    /// Phase `phi` in `[-pi/2, pi/2]` with `e^{i phi} = (|z|^2 + i t) / d_K^2`.
    pub fn koranyi_phase(&self) -> f64 {
        self.t.atan2(self.z_norm_sq())
    }
}

fn check_dim(g: &GroupElement, h: &GroupElement) -> Result<()> {
    if g.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: h.n(),
        });
    }
    Ok(())
}

pub fn multiply(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    g.multiply(h)
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    g.inverse()
}

pub fn dilate(lambda: f64, g: &GroupElement) -> Result<GroupElement> {
    g.dilate(lambda)
}

pub fn rho(g: &GroupElement) -> f64 {
    g.rho()
}

/// `d(g, h) = ||h^{-1} g||` in the chosen norm.
pub fn distance(kind: MetricKind, g: &GroupElement, h: &GroupElement) -> Result<f64> {
    check_dim(g, h)?;
    Ok(h.inverse().mul_unchecked(g).norm(kind))
}

/// `h^{-1} g` on flat coordinate slices `[x.., y.., t]`, written into `out`.
#[inline]
pub fn left_quotient_flat(n: usize, h: &[f64], g: &[f64], out: &mut [f64]) {
    let mut t = g[2 * n] - h[2 * n];
    for i in 0..n {
        let (hx, hy) = (h[i], h[n + i]);
        out[i] = g[i] - hx;
        out[n + i] = g[n + i] - hy;
        t += 2.0 * (hx * g[n + i] - hy * g[i]);
    }
    out[2 * n] = t;
}

/// Gauge norm of flat coordinates.
#[inline]
pub fn gauge_norm_flat(v: &[f64]) -> f64 {
    let k = v.len() - 1;
    v[..k].iter().fold(v[k].abs().sqrt(), |m, c| m.max(c.abs()))
}

/// Smooth functions on the group that can be evaluated and differentiated.
pub trait Symbol: Sync {
    fn dim(&self) -> usize;

    fn value(&self, g: &GroupElement) -> f64;

    /// Euclidean partials in the flat order `(d/dx_1.., d/dy_1.., d/dt)`,
    /// when available in closed form.
    fn partials(&self, _g: &GroupElement) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// Central-difference Euclidean partials with step `h`.
pub fn fd_partials(b: &dyn Symbol, g: &GroupElement, h: f64) -> Vec<f64> {
    let base = g.to_flat();
    let mut out = Vec::with_capacity(base.len());
    let mut work = base.clone();
    for k in 0..base.len() {
        work[k] = base[k] + h;
        let plus = b.value(&GroupElement::from_flat(&work).expect("flat layout"));
        work[k] = base[k] - h;
        let minus = b.value(&GroupElement::from_flat(&work).expect("flat layout"));
        work[k] = base[k];
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

fn partials_or_fd(b: &dyn Symbol, g: &GroupElement) -> Result<Vec<f64>> {
    match b.partials(g) {
        Some(p) => p,
        None => Ok(fd_partials(b, g, H_FD)),
    }
}

/// Combines Euclidean partials into the left-invariant field with index
/// `l` in `1..=2n+1`: `X_l = d/dx_l - 2 y_l d/dt`, `Y_l = d/dy_l + 2 x_l d/dt`,
/// and `T = d/dt` for `l = 2n+1`.
pub fn field_from_partials(l: usize, g: &GroupElement, d: &[f64]) -> Result<f64> {
    let n = g.n();
    if l == 0 || l > 2 * n + 1 {
        return Err(Error::FieldIndex {
            index: l,
            max: 2 * n + 1,
        });
    }
    let dt = d[2 * n];
    Ok(if l <= n {
        d[l - 1] - 2.0 * g.y[l - 1] * dt
    } else if l <= 2 * n {
        let m = l - n - 1;
        d[n + m] + 2.0 * g.x[m] * dt
    } else {
        dt
    })
}

/// `(X_l b)(g)`, from analytic partials when the symbol supplies them.
pub fn apply_field(l: usize, b: &dyn Symbol, g: &GroupElement) -> Result<f64> {
    if b.dim() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: g.n(),
        });
    }
    let d = partials_or_fd(b, g)?;
    field_from_partials(l, g, &d)
}

/// Same as [`apply_field`] but always by central differences with step `h`.
pub fn apply_field_fd(l: usize, b: &dyn Symbol, g: &GroupElement, h: f64) -> Result<f64> {
    let d = fd_partials(b, g, h);
    field_from_partials(l, g, &d)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaylorVariant {
    /// `b(g0) + sum_k X_k b(g0) (x_k - x0_k)`.
    #[default]
    Plain,
    /// Each term divided by `k!`, as in the printed statement.
    Factorial,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorResult {
    pub approximation: f64,
    pub remainder: f64,
}

/// First-order horizontal Taylor polynomial of `b` at `g0`, evaluated at `g`.
pub fn horizontal_taylor(
    b: &dyn Symbol,
    g0: &GroupElement,
    g: &GroupElement,
    variant: TaylorVariant,
) -> Result<TaylorResult> {
    check_dim(g0, g)?;
    let n = g0.n();
    let d = partials_or_fd(b, g0)?;
    let mut approximation = b.value(g0);
    let mut factorial = 1.0;
    for k in 1..=2 * n {
        factorial *= k as f64;
        let dx = if k <= n {
            g.x[k - 1] - g0.x[k - 1]
        } else {
            g.y[k - n - 1] - g0.y[k - n - 1]
        };
        let scale = match variant {
            TaylorVariant::Plain => 1.0,
            TaylorVariant::Factorial => 1.0 / factorial,
        };
        approximation += field_from_partials(k, g0, &d)? * dx * scale;
    }
    Ok(TaylorResult {
        approximation,
        remainder: b.value(g) - approximation,
    })
}

/// Built-in smooth symbol families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothSymbol {
    /// `a (max(0, 1 - d_K(c^{-1} g)^2 / s^2))^3`. Twice differentiable away
    /// from `c` (where `d_K^2` has a conical point in `t`).
    Bump {
        center: GroupElement,
        radius: f64,
        amplitude: f64,
    },
    /// `a prod x_i^{px_i} y_i^{py_i} t^{pt}`.
    Monomial {
        px: Vec<u32>,
        py: Vec<u32>,
        pt: u32,
        amplitude: f64,
    },
    Constant {
        n: usize,
        value: f64,
    },
}

impl SmoothSymbol {
    pub fn bump(center: GroupElement, radius: f64) -> Self {
        SmoothSymbol::Bump {
            center,
            radius,
            amplitude: 1.0,
        }
    }

    /// `b ∘ δ_r`.
    pub fn dilated(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDilation(r));
        }
        Ok(match self {
            SmoothSymbol::Bump {
                center,
                radius,
                amplitude,
            } => SmoothSymbol::Bump {
                center: center.dilate_unchecked(1.0 / r),
                radius: radius / r,
                amplitude: *amplitude,
            },
            SmoothSymbol::Monomial {
                px,
                py,
                pt,
                amplitude,
            } => {
                let deg: u32 = px.iter().sum::<u32>() + py.iter().sum::<u32>() + 2 * pt;
                SmoothSymbol::Monomial {
                    px: px.clone(),
                    py: py.clone(),
                    pt: *pt,
                    amplitude: amplitude * r.powi(deg as i32),
                }
            }
            c @ SmoothSymbol::Constant { .. } => c.clone(),
        })
    }

    /// `λ b`.
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            SmoothSymbol::Bump {
                center,
                radius,
                amplitude,
            } => SmoothSymbol::Bump {
                center: center.clone(),
                radius: *radius,
                amplitude: amplitude * lambda,
            },
            SmoothSymbol::Monomial {
                px,
                py,
                pt,
                amplitude,
            } => SmoothSymbol::Monomial {
                px: px.clone(),
                py: py.clone(),
                pt: *pt,
                amplitude: amplitude * lambda,
            },
            SmoothSymbol::Constant { n, value } => SmoothSymbol::Constant {
                n: *n,
                value: value * lambda,
            },
        }
    }

    /// Left translate `g -> b(h^{-1} g)`; only bumps and constants.
    pub fn translated(&self, h: &GroupElement) -> Result<Self> {
        match self {
            SmoothSymbol::Bump {
                center,
                radius,
                amplitude,
            } => Ok(SmoothSymbol::Bump {
                center: h.multiply(center)?,
                radius: *radius,
                amplitude: *amplitude,
            }),
            c @ SmoothSymbol::Constant { .. } => Ok(c.clone()),
            SmoothSymbol::Monomial { .. } => Err(Error::Config(
                "monomials are not closed under translation".into(),
            )),
        }
    }

    /// Koranyi ball of radius `radius` around `center` for bumps.
    pub fn support(&self) -> Option<(&GroupElement, f64)> {
        match self {
            SmoothSymbol::Bump { center, radius, .. } => Some((center, *radius)),
            _ => None,
        }
    }
}

impl Symbol for SmoothSymbol {
    fn dim(&self) -> usize {
        match self {
            SmoothSymbol::Bump { center, .. } => center.n(),
            SmoothSymbol::Monomial { px, .. } => px.len(),
            SmoothSymbol::Constant { n, .. } => *n,
        }
    }

    fn value(&self, g: &GroupElement) -> f64 {
        match self {
            SmoothSymbol::Bump {
                center,
                radius,
                amplitude,
            } => {
                let u = center.inverse().mul_unchecked(g);
                let r2 = u.z_norm_sq();
                let q = (r2 * r2 + u.t * u.t).sqrt() / (radius * radius);
                if q >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - q).powi(3)
                }
            }
            SmoothSymbol::Monomial {
                px,
                py,
                pt,
                amplitude,
            } => {
                let mut v = *amplitude * g.t.powi(*pt as i32);
                for i in 0..px.len() {
                    v *= g.x[i].powi(px[i] as i32) * g.y[i].powi(py[i] as i32);
                }
                v
            }
            SmoothSymbol::Constant { value, .. } => *value,
        }
    }

    fn partials(&self, g: &GroupElement) -> Option<Result<Vec<f64>>> {
        if g.n() != self.dim() {
            return Some(Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: g.n(),
            }));
        }
        let n = g.n();
        Some(match self {
            SmoothSymbol::Bump {
                center,
                radius,
                amplitude,
            } => {
                let u = center.inverse().mul_unchecked(g);
                let r2 = u.z_norm_sq();
                let dk2 = (r2 * r2 + u.t * u.t).sqrt();
                let s2 = radius * radius;
                let q = dk2 / s2;
                let mut out = vec![0.0; 2 * n + 1];
                if q >= 1.0 {
                    return Some(Ok(out));
                }
                if dk2 == 0.0 {
                    return Some(Err(Error::NotDifferentiable));
                }
                // b = a (1 - q)^3, dq = d(dk2)/s2
                let outer = -3.0 * amplitude * (1.0 - q).powi(2) / s2;
                let d_ut = u.t / dk2;
                for i in 0..n {
                    // u_t = t - c_t + 2 c_x.y - 2 c_y.x
                    let dux = 2.0 * r2 * u.x[i] / dk2 - 2.0 * center.y[i] * d_ut;
                    let duy = 2.0 * r2 * u.y[i] / dk2 + 2.0 * center.x[i] * d_ut;
                    out[i] = outer * dux;
                    out[n + i] = outer * duy;
                }
                out[2 * n] = outer * d_ut;
                Ok(out)
            }
            SmoothSymbol::Monomial {
                px,
                py,
                pt,
                amplitude,
            } => {
                let mut coords = g.to_flat();
                let mut pows: Vec<u32> = px.iter().chain(py.iter()).copied().collect();
                pows.push(*pt);
                let mut out = vec![0.0; 2 * n + 1];
                for k in 0..coords.len() {
                    if pows[k] == 0 {
                        continue;
                    }
                    let mut v = *amplitude * pows[k] as f64;
                    for (m, c) in coords.iter().enumerate() {
                        let e = if m == k { pows[m] - 1 } else { pows[m] };
                        v *= c.powi(e as i32);
                    }
                    out[k] = v;
                }
                coords.clear();
                Ok(out)
            }
            SmoothSymbol::Constant { .. } => Ok(vec![0.0; 2 * n + 1]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_example() {
        let g = GroupElement::h1(1.0, 0.0, 0.0);
        let h = GroupElement::h1(0.0, 1.0, 0.0);
        assert_eq!(g.multiply(&h).unwrap(), GroupElement::h1(1.0, 1.0, -2.0));
        let a = GroupElement::h1(1.0, 0.0, 5.0);
        let b = GroupElement::h1(-1.0, 0.0, -5.0);
        assert_eq!(a.multiply(&b).unwrap(), GroupElement::origin(1));
        assert_eq!(a.multiply(&GroupElement::origin(1)).unwrap(), a);
    }

    #[test]
    fn norms_and_dilation() {
        assert_eq!(
            dilate(2.0, &GroupElement::h1(1.0, 1.0, 1.0)).unwrap(),
            GroupElement::h1(2.0, 2.0, 4.0)
        );
        assert_eq!(GroupElement::h1(0.0, 0.0, 4.0).rho(), 2.0);
        assert_eq!(GroupElement::h1(1.0, -2.0, 9.0).gauge_norm(), 3.0);
        assert!(matches!(
            dilate(0.0, &GroupElement::origin(1)),
            Err(Error::NonPositiveDilation(_))
        ));
        let bad = GroupElement::origin(2);
        assert!(matches!(
            GroupElement::origin(1).multiply(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flat_quotient_matches_group_ops() {
        let g = GroupElement::new(vec![0.3, -1.2], vec![0.7, 0.1], 2.5).unwrap();
        let h = GroupElement::new(vec![-0.4, 0.9], vec![1.1, -0.6], -0.8).unwrap();
        let want = h.inverse().multiply(&g).unwrap().to_flat();
        let mut out = vec![0.0; 5];
        left_quotient_flat(2, &h.to_flat(), &g.to_flat(), &mut out);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fields_on_coordinate_functions() {
        let t = SmoothSymbol::Monomial {
            px: vec![0],
            py: vec![0],
            pt: 1,
            amplitude: 1.0,
        };
        let x = SmoothSymbol::Monomial {
            px: vec![1],
            py: vec![0],
            pt: 0,
            amplitude: 1.0,
        };
        let g = GroupElement::h1(0.4, -0.7, 1.3);
        assert_eq!(apply_field(1, &t, &g).unwrap(), -2.0 * g.y[0]);
        assert_eq!(apply_field(2, &t, &g).unwrap(), 2.0 * g.x[0]);
        assert_eq!(apply_field(3, &t, &g).unwrap(), 1.0);
        assert_eq!(apply_field(1, &x, &g).unwrap(), 1.0);
        assert!(matches!(
            apply_field(4, &x, &g),
            Err(Error::FieldIndex { .. })
        ));
    }

    #[test]
    fn taylor_exact_cases() {
        let g0 = GroupElement::h1(0.2, 0.1, -0.3);
        let g = GroupElement::h1(0.5, -0.4, 0.9);
        let affine_x = SmoothSymbol::Monomial {
            px: vec![1],
            py: vec![0],
            pt: 0,
            amplitude: 3.0,
        };
        let r = horizontal_taylor(&affine_x, &g0, &g, TaylorVariant::Plain).unwrap();
        assert!(r.remainder.abs() < 1e-15);
        let c = SmoothSymbol::Constant { n: 1, value: 2.0 };
        let r = horizontal_taylor(&c, &g0, &g, TaylorVariant::Factorial).unwrap();
        assert_eq!(r.remainder, 0.0);
    }
}
