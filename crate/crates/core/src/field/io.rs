//! Field snapshots: CSV (coordinates, value) and raw little-endian f64 with a JSON sidecar.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Field, GridSpec};
use crate::num::Real;

/// Sidecar describing a raw snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub center: Vec<f64>,
    /// Stereographic scale ℓ of the grid.
    #[serde(rename = "L")]
    pub scale: f64,
    #[serde(rename = "N")]
    pub size: usize,
    pub len: usize,
    pub dtype: String,
    pub layout: String,
}

impl Sidecar {
    pub fn for_grid(spec: &GridSpec, len: usize) -> Self {
        let layout = if spec.n == 1 {
            "theta_j = -pi + (2j+1)pi/N, x = c + L tan(theta/2)"
        } else {
            "ring-major: Gauss-Legendre t_i (N/2 rings, ascending) x uniform phi_k = 2pi k/N; r = L sqrt((1+t)/(1-t))"
        };
        Self {
            n: spec.n,
            center: spec.center.clone(),
            scale: spec.scale,
            size: spec.size,
            len,
            dtype: "f64-le".into(),
            layout: layout.into(),
        }
    }
}

pub fn write_csv<T: Real, W: Write>(u: &Field<T>, mut out: W) -> io::Result<()> {
    let n = u.grid().n();
    let header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).chain(std::iter::once("value".to_string())).collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, v) in u.values().iter().enumerate() {
        let mut line = String::new();
        for c in u.grid().point(i) {
            line.push_str(&format!("{},", c.f64()));
        }
        line.push_str(&format!("{}", v.f64()));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn raw_bytes<T: Real>(u: &Field<T>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(8 * u.values().len());
    for v in u.values() {
        bytes.extend_from_slice(&v.f64().to_le_bytes());
    }
    bytes
}

pub fn sidecar<T: Real>(u: &Field<T>) -> Sidecar {
    Sidecar::for_grid(u.grid().spec(), u.values().len())
}

pub fn read_raw(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
}
