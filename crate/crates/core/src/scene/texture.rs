use serde::{Deserialize, Serialize};

/// Procedural surface pattern, evaluated at surface coordinates in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Solid {
        color: [u8; 3],
    },
    Checker {
        cell: f64,
        a: [u8; 3],
        b: [u8; 3],
    },
    /// Linear ramp along the first (`axis = 0`) or second surface axis,
    /// repeating every `period` meters.
    Gradient {
        from: [u8; 3],
        to: [u8; 3],
        period: f64,
        #[serde(default)]
        axis: u8,
    },
    /// Smooth sinusoidal modulation around a base color.
    Waves {
        base: [u8; 3],
        amplitude: f64,
        period: f64,
    },
}

impl Default for Texture {
    fn default() -> Self {
        Texture::Solid { color: [128, 128, 128] }
    }
}

impl Texture {
    pub fn color_at(&self, u: f64, v: f64) -> [u8; 3] {
        match *self {
            Texture::Solid { color } => color,
            Texture::Checker { cell, a, b } => {
                let iu = (u / cell).floor() as i64;
                let iv = (v / cell).floor() as i64;
                if (iu + iv).rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
            Texture::Gradient { from, to, period, axis } => {
                let x = if axis == 0 { u } else { v };
                let t = (x / period).rem_euclid(1.0);
                let mut out = [0u8; 3];
                for c in 0..3 {
                    let val = from[c] as f64 + t * (to[c] as f64 - from[c] as f64);
                    out[c] = val.round().clamp(0.0, 255.0) as u8;
                }
                out
            }
            Texture::Waves { base, amplitude, period } => {
                let w = std::f64::consts::TAU / period;
                let s = (w * u).sin() + 0.6 * (1.7 * w * v + 0.5).sin();
                let mut out = [0u8; 3];
                for c in 0..3 {
                    let phase = c as f64 * 0.35;
                    let val = base[c] as f64 + amplitude * (s + 0.3 * (w * (u + v) + phase).cos());
                    out[c] = val.round().clamp(0.0, 255.0) as u8;
                }
                out
            }
        }
    }
}
