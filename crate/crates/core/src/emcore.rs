//! Complex amplitudes, 2x2 Jones algebra and unit helpers.
//!
//! Conventions used across the crate:
//!
//! * time dependence `e^{+iωt}`; phases are reported in degrees;
//! * lengths in millimetres, frequencies in GHz;
//! * Jones vectors and matrices are expressed in the global `xy` basis.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Speed of light in mm·GHz.
pub const SPEED_OF_LIGHT_MM_GHZ: f64 = 299.792458;

/// Complex field amplitude or reflection coefficient.
pub type ComplexAmplitude<T> = Complex<T>;

/// Builds `mag·e^{i·deg}`.
pub fn polar_deg<T: Scalar>(mag: T, deg: T) -> Complex<T> {
    Complex::from_polar(mag, deg.to_radians())
}

/// Argument of `c` in degrees, in `(-180, 180]`.
pub fn phase_deg<T: Scalar>(c: Complex<T>) -> T {
    c.arg().to_degrees()
}

/// Frequency in GHz. Always strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Frequency<T: Scalar = f64>(T);

impl<T: Scalar> Frequency<T> {
    pub fn new(ghz: T) -> Result<Self> {
        if ghz > T::zero() && ghz.is_finite() {
            Ok(Frequency(ghz))
        } else {
            Err(Error::Domain(format!(
                "frequency must be positive, got {ghz} GHz"
            )))
        }
    }

    pub fn ghz(self) -> T {
        self.0
    }

    /// Free-space wavelength in mm.
    pub fn wavelength_mm(self) -> T {
        T::lit(SPEED_OF_LIGHT_MM_GHZ) / self.0
    }

    /// Free-space wavenumber in rad/mm.
    pub fn wavenumber(self) -> T {
        T::TAU() / self.wavelength_mm()
    }
}

impl TryFrom<f64> for Frequency<f64> {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Frequency::new(v)
    }
}

impl From<Frequency<f64>> for f64 {
    fn from(f: Frequency<f64>) -> f64 {
        f.0
    }
}

impl Serialize for Frequency<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Frequency<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Frequency::new(v).map_err(serde::de::Error::custom)
    }
}

/// Free-space wavelength `c/f` in mm for a frequency given in GHz.
pub fn wavelength<T: Scalar>(ghz: T) -> Result<T> {
    Frequency::new(ghz).map(Frequency::wavelength_mm)
}

/// Power ratio in dB.
pub fn db<T: Scalar>(power_ratio: T) -> Result<T> {
    if power_ratio > T::zero() {
        Ok(T::lit(10.0) * power_ratio.log10())
    } else {
        Err(Error::Domain(format!(
            "logarithm of non-positive ratio {power_ratio}"
        )))
    }
}

/// Amplitude ratio in dB.
pub fn db_amplitude<T: Scalar>(amp_ratio: T) -> Result<T> {
    if amp_ratio > T::zero() {
        Ok(T::lit(20.0) * amp_ratio.log10())
    } else {
        Err(Error::Domain(format!(
            "logarithm of non-positive ratio {amp_ratio}"
        )))
    }
}

/// Linear power ratio from dB.
pub fn from_db<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Linear amplitude ratio from dB.
pub fn amplitude_from_db<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(20.0))
}

/// Interpolates between two complex values linearly in magnitude and in
/// phase along the shorter arc; `t = 0` gives `a`, `t = 1` gives `b`.
pub fn lerp_polar<T: Scalar>(a: Complex<T>, b: Complex<T>, t: T) -> Complex<T> {
    let pa = phase_deg(a);
    let pb = pa + wrap_deg_signed(phase_deg(b) - pa);
    polar_deg(a.norm() + t * (b.norm() - a.norm()), pa + t * (pb - pa))
}

/// Reduces a phase to `[0, 360)`.
pub fn wrap_deg<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let r = deg % full;
    let r = if r < T::zero() { r + full } else { r };
    // -1e-20 % 360 + 360 rounds to exactly 360
    if r >= full {
        T::zero()
    } else {
        r
    }
}

/// Reduces a phase difference to `(-180, 180]`.
pub fn wrap_deg_signed<T: Scalar>(deg: T) -> T {
    let w = wrap_deg(deg);
    if w > T::lit(180.0) {
        w - T::lit(360.0)
    } else {
        w
    }
}

/// Field state in the global `xy` basis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JonesVector<T: Scalar = f64> {
    pub ex: Complex<T>,
    pub ey: Complex<T>,
}

impl<T: Scalar> JonesVector<T> {
    pub fn new(ex: Complex<T>, ey: Complex<T>) -> Self {
        JonesVector { ex, ey }
    }

    pub fn x_hat() -> Self {
        JonesVector::new(
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        )
    }

    /// Pure `y` state; `ex` is exactly zero.
    pub fn y_hat() -> Self {
        JonesVector::new(
            Complex::new(T::zero(), T::zero()),
            Complex::new(T::one(), T::zero()),
        )
    }

    pub fn norm_sqr(&self) -> T {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        JonesVector::new(self.ex * s, self.ey * s)
    }
}

/// 2x2 operator acting on [`JonesVector`]s, row-major `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesMatrix<T: Scalar = f64> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> JonesMatrix<T> {
    pub fn new(m: [[Complex<T>; 2]; 2]) -> Self {
        JonesMatrix { m }
    }

    pub fn identity() -> Self {
        Self::diag(
            Complex::new(T::one(), T::zero()),
            Complex::new(T::one(), T::zero()),
        )
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        JonesMatrix {
            m: [[z, z], [z, z]],
        }
    }

    pub fn diag(a: Complex<T>, b: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        JonesMatrix {
            m: [[a, z], [z, b]],
        }
    }

    /// Active rotation by `alpha_deg`: columns are the rotated basis vectors.
    pub fn rotation(alpha_deg: T) -> Self {
        let (s, c) = alpha_deg.to_radians().sin_cos();
        let z = T::zero();
        JonesMatrix {
            m: [
                [Complex::new(c, z), Complex::new(-s, z)],
                [Complex::new(s, z), Complex::new(c, z)],
            ],
        }
    }

    pub fn transpose(&self) -> Self {
        let m = self.m;
        JonesMatrix {
            m: [[m[0][0], m[1][0]], [m[0][1], m[1][1]]],
        }
    }

    pub fn apply(&self, v: &JonesVector<T>) -> JonesVector<T> {
        JonesVector {
            ex: self.m[0][0] * v.ex + self.m[0][1] * v.ey,
            ey: self.m[1][0] * v.ex + self.m[1][1] * v.ey,
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.m
            .iter()
            .flatten()
            .fold(T::zero(), |acc, c| acc + c.norm_sqr())
            .sqrt()
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    /// Expresses in the global basis an operator given in a basis rotated by
    /// `alpha_deg`: returns `R(α)·m·R(α)ᵀ` with `R` the active rotation.
    ///
    /// Equivalently `R'(−α)·m·R'(α)` with `R'` the passive (coordinate)
    /// rotation. `rotate_basis(diag(1, −1), 45°)` is the swap `[[0,1],[1,0]]`.
    pub fn rotate_basis(&self, alpha_deg: T) -> Self {
        let r = Self::rotation(alpha_deg);
        r * *self * r.transpose()
    }
}

impl<T: Scalar> Mul for JonesMatrix<T> {
    type Output = JonesMatrix<T>;

    fn mul(self, b: JonesMatrix<T>) -> JonesMatrix<T> {
        let a = self.m;
        let b = b.m;
        JonesMatrix {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

impl<T: Scalar> Add for JonesMatrix<T> {
    type Output = JonesMatrix<T>;

    fn add(self, b: JonesMatrix<T>) -> JonesMatrix<T> {
        let mut out = self;
        for (o, x) in out.m.iter_mut().flatten().zip(b.m.iter().flatten()) {
            *o = *o + *x;
        }
        out
    }
}

impl<T: Scalar> Sub for JonesMatrix<T> {
    type Output = JonesMatrix<T>;

    fn sub(self, b: JonesMatrix<T>) -> JonesMatrix<T> {
        let mut out = self;
        for (o, x) in out.m.iter_mut().flatten().zip(b.m.iter().flatten()) {
            *o = *o - *x;
        }
        out
    }
}

/// Free-function form of [`JonesMatrix::rotate_basis`].
pub fn rotate_basis<T: Scalar>(m: &JonesMatrix<T>, alpha_deg: T) -> JonesMatrix<T> {
    m.rotate_basis(alpha_deg)
}
