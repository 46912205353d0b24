//! Seeded 128x128 permittivity (and conductivity) phantoms.
//!
//! Images are indexed `[row, col]`, row 0 at the top. Pixel `(r, c)` has its
//! centre at `(c + 0.5, r + 0.5)` in pixel units.

mod emnist;
mod shapes;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emnist::{gen_emnist, gen_multi, GlyphStore};
pub use shapes::{austria_profile, from_shapes, gen_circles, gen_lossy, gen_rectangles, gen_stratum, Shape};

/// Image side in pixels.
pub const SIZE: usize = 128;
/// Physical side of the imaging square (m).
pub const SIDE_M: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
    F,
    #[serde(rename = "austria")]
    Austria,
}

impl Family {
    pub const ALL: [Family; 7] = [Family::A, Family::B, Family::C, Family::D, Family::E, Family::F, Family::Austria];

    pub fn needs_glyphs(self) -> bool {
        matches!(self, Family::D | Family::E)
    }

    pub fn is_lossy(self) -> bool {
        self == Family::F
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
            Family::E => "E",
            Family::F => "F",
            Family::Austria => "austria",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "A" | "a" => Family::A,
            "B" | "b" => Family::B,
            "C" | "c" => Family::C,
            "D" | "d" => Family::D,
            "E" | "e" => Family::E,
            "F" | "f" => Family::F,
            "austria" | "Austria" => Family::Austria,
            other => return Err(Error::invalid(format!("unknown family {other:?}; expected A-F or austria"))),
        })
    }
}

/// Generated truth maps with a description of what was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub eps: Array2<f64>,
    pub sigma: Array2<f64>,
    pub meta: serde_json::Value,
}

impl Phantom {
    fn lossless(eps: Array2<f64>, meta: serde_json::Value) -> Self {
        let sigma = Array2::zeros(eps.dim());
        Phantom { eps, sigma, meta }
    }
}

/// Foreground permittivity of the Austria profile when generated by family.
pub const AUSTRIA_EPS: f64 = 2.0;

/// Dispatches to the generator for `family`.
pub fn generate(family: Family, seed: u64, glyphs: Option<&GlyphStore>) -> Result<Phantom> {
    let need = || glyphs.ok_or_else(|| Error::invalid(format!("family {family} needs an EMNIST glyph store")));
    match family {
        Family::A => Ok(gen_stratum(seed)),
        Family::B => Ok(gen_circles(seed)),
        Family::C => Ok(gen_rectangles(seed)),
        Family::D => gen_emnist(seed, need()?),
        Family::E => gen_multi(seed, need()?),
        Family::F => Ok(gen_lossy(seed)),
        Family::Austria => austria_profile(AUSTRIA_EPS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_roundtrip() {
        for f in Family::ALL {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(json, format!("\"{f}\""));
        }
        assert!("G".parse::<Family>().is_err());
    }

    #[test]
    fn glyph_families_require_a_store() {
        assert!(generate(Family::D, 1, None).is_err());
        assert!(generate(Family::B, 1, None).is_ok());
    }

    #[test]
    fn all_outputs_respect_material_ranges() {
        for f in [Family::A, Family::B, Family::C, Family::F, Family::Austria] {
            for seed in 0..40 {
                let p = generate(f, seed, None).unwrap();
                assert!(p.eps.iter().all(|&v| (1.0..=10.0).contains(&v)), "{f} {seed}");
                assert!(p.sigma.iter().all(|&v| (0.0..=0.2).contains(&v)), "{f} {seed}");
                if !f.is_lossy() {
                    assert!(p.sigma.iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn contrast_reaches_high_end() {
        for f in [Family::A, Family::B, Family::C, Family::F] {
            let max =
                (0..1000).map(|s| generate(f, s, None).unwrap().eps.fold(1.0f64, |m, &v| m.max(v))).fold(0.0, f64::max);
            assert!(max - 1.0 >= 8.5, "{f}: {max}");
        }
    }
}
