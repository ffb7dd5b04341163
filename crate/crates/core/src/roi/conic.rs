use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Implicit conic `x^2 + k_xy*x*y + k_yy*y^2 + k_x*x + k_y*y + k = 0`, with the
/// `x^2` coefficient normalised to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConicCoeffs<T: Real> {
    pub k_xy: T,
    pub k_yy: T,
    pub k_x: T,
    pub k_y: T,
    pub k: T,
}

impl<T: Real> ConicCoeffs<T> {
    pub fn new(k_xy: T, k_yy: T, k_x: T, k_y: T, k: T) -> Self {
        Self { k_xy, k_yy, k_x, k_y, k }
    }

    /// `k_xy^2 - 4 k_yy`; negative exactly for ellipses.
    #[inline]
    pub fn discriminant(&self) -> T {
        self.k_xy * self.k_xy - T::lit(4.0) * self.k_yy
    }

    pub fn is_ellipse(&self) -> bool {
        self.is_finite() && self.discriminant() < T::zero()
    }

    pub fn is_finite(&self) -> bool {
        [self.k_xy, self.k_yy, self.k_x, self.k_y, self.k].iter().all(|v| v.is_finite())
    }

    /// Value of the implicit polynomial; negative inside an ellipse.
    #[inline]
    pub fn evaluate(&self, x: T, y: T) -> T {
        x * x + self.k_xy * x * y + self.k_yy * y * y + self.k_x * x + self.k_y * y + self.k
    }

    /// Residual at `(x, y)` relative to the magnitude of the individual terms.
    pub fn relative_residual(&self, x: T, y: T) -> T {
        let scale = (x * x).abs()
            + (self.k_xy * x * y).abs()
            + (self.k_yy * y * y).abs()
            + (self.k_x * x).abs()
            + (self.k_y * y).abs()
            + self.k.abs();
        self.evaluate(x, y).abs() / scale.max(T::min_positive_value())
    }
}

/// Ellipse in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CanonicalEllipse<T: Real> {
    /// Major semi-axis.
    pub a: T,
    /// Minor semi-axis.
    pub b: T,
    pub x0: T,
    pub y0: T,
    /// Orientation of the major axis in `[0, pi)`.
    pub theta: T,
}

impl<T: Real> CanonicalEllipse<T> {
    /// Builds an ellipse, reordering the axes so that `a >= b` and wrapping the
    /// angle into `[0, pi)`.
    pub fn new(a: T, b: T, x0: T, y0: T, theta: T) -> Self {
        let (a, b, theta) = if b > a { (b, a, theta + T::FRAC_PI_2()) } else { (a, b, theta) };
        Self { a, b, x0, y0, theta: wrap_angle(theta) }
    }

    pub fn circle(radius: T, x0: T, y0: T) -> Self {
        Self::new(radius, radius, x0, y0, T::zero())
    }

    pub fn to_conic(&self) -> ConicCoeffs<T> {
        let (s, c) = self.theta.sin_cos();
        let ia2 = T::one() / (self.a * self.a);
        let ib2 = T::one() / (self.b * self.b);
        let two = T::lit(2.0);
        let a = c * c * ia2 + s * s * ib2;
        let b = two * c * s * (ia2 - ib2);
        let cc = s * s * ia2 + c * c * ib2;
        let (x0, y0) = (self.x0, self.y0);
        let d = -two * a * x0 - b * y0;
        let e = -b * x0 - two * cc * y0;
        let f = a * x0 * x0 + b * x0 * y0 + cc * y0 * y0 - T::one();
        ConicCoeffs::new(b / a, cc / a, d / a, e / a, f / a)
    }

    /// Normalised elliptical radius: below one inside, one on the boundary.
    pub fn radial(&self, x: T, y: T) -> T {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = (dx * c + dy * s) / self.a;
        let v = (-dx * s + dy * c) / self.b;
        (u * u + v * v).sqrt()
    }

    /// Point at parametric angle `t`.
    #[inline]
    pub fn point_at(&self, t: T) -> [T; 2] {
        let (st, ct) = t.sin_cos();
        let (s, c) = self.theta.sin_cos();
        [self.x0 + self.a * ct * c - self.b * st * s, self.y0 + self.a * ct * s + self.b * st * c]
    }

    pub fn area(&self) -> T {
        T::PI() * self.a * self.b
    }

    pub fn cast<U: Real>(&self) -> CanonicalEllipse<U> {
        CanonicalEllipse {
            a: U::lit(self.a.as_f64()),
            b: U::lit(self.b.as_f64()),
            x0: U::lit(self.x0.as_f64()),
            y0: U::lit(self.y0.as_f64()),
            theta: U::lit(self.theta.as_f64()),
        }
    }
}

/// Reduce an angle to `[0, pi)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let mut t = theta % pi;
    if t < T::zero() {
        t += pi;
    }
    if t >= pi {
        t -= pi;
    }
    t
}

/// Conic through five points: the 5x5 system obtained by fixing the `x^2`
/// coefficient at one, solved after a similarity normalisation of the points.
pub fn conic_from_points<T: Real>(points: &[[T; 2]; 5]) -> Result<ConicCoeffs<T>> {
    for i in 0..5 {
        for j in i + 1..5 {
            if points[i] == points[j] {
                return Err(Error::SingularConfiguration);
            }
        }
    }
    let five = T::lit(5.0);
    let cx = points.iter().fold(T::zero(), |acc, p| acc + p[0]) / five;
    let cy = points.iter().fold(T::zero(), |acc, p| acc + p[1]) / five;
    let mean_dist =
        points.iter().fold(T::zero(), |acc, p| acc + ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()) / five;
    if !(mean_dist > T::zero()) {
        return Err(Error::SingularConfiguration);
    }
    let s = mean_dist / T::SQRT_2();

    let mut m = [[T::zero(); 6]; 5];
    for (row, p) in m.iter_mut().zip(points) {
        let u = (p[0] - cx) / s;
        let v = (p[1] - cy) / s;
        *row = [u * v, v * v, u, v, T::one(), -(u * u)];
    }
    let [b, c, d, e, f] = solve5(m)?;

    // Undo the normalisation u = (x - cx) / s and rescale by s^2.
    let k_xy = b;
    let k_yy = c;
    let k_x = -T::lit(2.0) * cx - b * cy + d * s;
    let k_y = -b * cx - T::lit(2.0) * c * cy + e * s;
    let k = cx * cx + b * cx * cy + c * cy * cy - d * s * cx - e * s * cy + f * s * s;
    let conic = ConicCoeffs::new(k_xy, k_yy, k_x, k_y, k);
    if !conic.is_finite() {
        return Err(Error::SingularConfiguration);
    }
    if !conic.is_ellipse() {
        return Err(Error::NotAnEllipse);
    }
    Ok(conic)
}

/// Gaussian elimination with partial pivoting on an augmented 5x6 matrix.
fn solve5<T: Real>(mut m: [[T; 6]; 5]) -> Result<[T; 5]> {
    let scale = m.iter().flat_map(|r| r[..5].iter()).fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = scale * T::epsilon().sqrt();
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()).unwrap();
        if !(m[pivot][col].abs() > tol) {
            return Err(Error::SingularConfiguration);
        }
        m.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            for k in col..6 {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
        }
    }
    let mut x = [T::zero(); 5];
    for row in (0..5).rev() {
        let mut acc = m[row][5];
        for k in row + 1..5 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Canonical parameters of an elliptical conic.
///
/// Semi-axes and centre use the closed forms built from
/// `psi = k_y^2 + k_yy k_x^2 - k_xy k_x k_y + (k_xy^2 - 4 k_yy) k` and
/// `psi_{1,2} = 1 + k_yy +/- sqrt((1 - k_yy)^2 + k_xy^2)`.
pub fn canonical_from_conic<T: Real>(conic: &ConicCoeffs<T>) -> Result<CanonicalEllipse<T>> {
    if !conic.is_ellipse() {
        return Err(Error::NotAnEllipse);
    }
    let ConicCoeffs { k_xy, k_yy, k_x, k_y, k } = *conic;
    let one = T::one();
    let two = T::lit(2.0);
    let disc = conic.discriminant();
    let psi = k_y * k_y + k_yy * k_x * k_x - k_xy * k_x * k_y + disc * k;
    let root = ((one - k_yy).powi(2) + k_xy * k_xy).sqrt();
    let psi1 = one + k_yy + root;
    let psi2 = one + k_yy - root;
    if !(psi > T::zero()) || !(psi2 > T::zero()) {
        return Err(Error::NotAnEllipse);
    }
    let a = -(two * psi * psi1).sqrt() / disc;
    let b = -(two * psi * psi2).sqrt() / disc;
    let x0 = (two * k_yy * k_x - k_xy * k_y) / disc;
    let y0 = (two * k_y - k_xy * k_x) / disc;
    // Major-axis direction: the eigenvector of the quadratic form with the
    // smaller eigenvalue.
    let theta = (-k_xy).atan2(k_yy - one) / two;
    if ![a, b, x0, y0, theta].iter().all(|v| v.is_finite()) || !(b > T::zero()) {
        return Err(Error::NotAnEllipse);
    }
    Ok(CanonicalEllipse { a, b, x0, y0, theta: wrap_angle(theta) })
}

/// `n_s` points at uniformly spaced parametric angles.
pub fn sample_circumference<T: Real>(ellipse: &CanonicalEllipse<T>, n_s: usize) -> Vec<[T; 2]> {
    let step = T::TAU() / T::from_usize_lossy(n_s);
    (0..n_s).map(|i| ellipse.point_at(step * T::from_usize_lossy(i))).collect()
}
