//! Serializable system descriptions: drift and Lindblad specs as short
//! strings, plus the time grid. This is what dataset manifests, checkpoints,
//! and run configs store instead of raw matrices.
//!
//! Drift grammar: a '+'-separated sum of terms `[coefficient]AXIS[AXIS]`,
//! where AXIS is one of `id`, `sx`, `sy`, `sz`. A single axis means the
//! operator acts on the first qubit (tensored with identity); two axes give
//! the two-qubit product. Examples:
//!
//!   "sy"            sigma_y kron 1
//!   "0.8sx+0.2sy"   0.8 sigma_x kron 1 + 0.2 sigma_y kron 1
//!   "idsy"          1 kron sigma_y
//!   "0.1sxsx+0.8sysy+0.1szsz"  spin-chain drift
//!   "none"          zero drift
//!
//! The whole sum is multiplied by the separate strength `gamma`.
//!
//! Lindblad presets: `none`, `lind1` (L = |0><1| kron 1), `lind2`
//! (L1 = sz kron 1, L2 = 1 kron sz), `lind3` (L1 = sz kron 1,
//! L2 = |0><1| kron 1); every operator uses the same rate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, ONE, ZERO};
use crate::quantum::{pauli, PauliAxis};

/// Parameters of the drifted system, as stored in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub horizon: f64,
    pub slots: usize,
    pub drift: String,
    pub gamma: f64,
    pub lindblad: String,
    pub lindblad_rate: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            slots: DEFAULT_SLOTS,
            drift: "sy".into(),
            gamma: 0.2,
            lindblad: "none".into(),
            lindblad_rate: 0.01,
        }
    }
}

impl SystemConfig {
    /// The drifted system this config describes.
    pub fn drifted(&self) -> Result<SystemSpec> {
        let drift = parse_drift(&self.drift)?.mapv(|z| z * self.gamma);
        let lindblads = parse_lindblad(&self.lindblad, self.lindblad_rate)?;
        SystemSpec::two_qubit(drift, lindblads, self.horizon, self.slots)
    }

    /// The matching drift-free closed system (same time grid) used to
    /// generate NCPs.
    pub fn drift_free(&self) -> Result<SystemSpec> {
        SystemSpec::two_qubit(Array2::zeros((4, 4)), Vec::new(), self.horizon, self.slots)
    }

    /// Canonical string identifying the drifted system; datasets and
    /// checkpoints must agree on it before they can be combined.
    pub fn tag(&self) -> String {
        format!(
            "T={};n={};drift={};gamma={};lindblad={};rate={}",
            self.horizon,
            self.slots,
            normalize_spec(&self.drift),
            self.gamma,
            normalize_spec(&self.lindblad),
            self.lindblad_rate
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.drifted().map(|_| ())
    }
}

fn normalize_spec(spec: &str) -> String {
    spec.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase()
}

fn axis_operator(name: &str) -> Option<PauliAxis> {
    match name {
        "id" => Some(PauliAxis::I),
        "sx" => Some(PauliAxis::X),
        "sy" => Some(PauliAxis::Y),
        "sz" => Some(PauliAxis::Z),
        _ => None,
    }
}

/// Parse one drift term: optional real coefficient followed by one or two
/// axis names.
fn parse_term(term: &str) -> Result<CMatrix> {
    let split = term
        .char_indices()
        .find(|(_, c)| c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Parse(format!("drift term '{term}' has no operator")))?;
    let (coef_str, ops) = term.split_at(split);
    let coef: f64 = if coef_str.is_empty() {
        1.0
    } else {
        coef_str
            .parse()
            .map_err(|_| Error::Parse(format!("bad coefficient '{coef_str}' in drift term '{term}'")))?
    };

    let (first, second) = match ops.len() {
        2 => (ops, "id"),
        4 => (&ops[..2], &ops[2..]),
        _ => return Err(Error::Parse(format!("bad operator '{ops}' in drift term '{term}'"))),
    };
    let a = axis_operator(first)
        .ok_or_else(|| Error::Parse(format!("unknown axis '{first}' in drift term '{term}'")))?;
    let b = axis_operator(second)
        .ok_or_else(|| Error::Parse(format!("unknown axis '{second}' in drift term '{term}'")))?;
    Ok(kron(&pauli(a), &pauli(b)).mapv(|z| z * coef))
}

/// Parse a drift spec into its (unscaled) two-qubit Hamiltonian.
pub fn parse_drift(spec: &str) -> Result<CMatrix> {
    let spec = normalize_spec(spec);
    if spec.is_empty() || spec == "none" {
        return Ok(Array2::zeros((4, 4)));
    }
    let mut total = Array2::from_elem((4, 4), ZERO);
    for term in spec.split('+') {
        if term.is_empty() {
            return Err(Error::Parse(format!("empty term in drift spec '{spec}'")));
        }
        total = total + parse_term(term)?;
    }
    Ok(total)
}

/// Lowering operator |0><1| on one qubit.
fn lowering() -> CMatrix {
    let mut m = Array2::from_elem((2, 2), ZERO);
    m[[0, 1]] = ONE;
    m
}

/// Resolve a Lindblad preset name into its operators, all at the given rate.
pub fn parse_lindblad(spec: &str, rate: f64) -> Result<Vec<(CMatrix, f64)>> {
    if rate < 0.0 {
        return Err(Error::NegativeRate(rate));
    }
    let id2 = pauli(PauliAxis::I);
    let sz1 = kron(&pauli(PauliAxis::Z), &id2);
    let sz2 = kron(&id2, &pauli(PauliAxis::Z));
    let low1 = kron(&lowering(), &id2);
    match normalize_spec(spec).as_str() {
        "" | "none" => Ok(Vec::new()),
        "lind1" => Ok(vec![(low1, rate)]),
        "lind2" => Ok(vec![(sz1, rate), (sz2, rate)]),
        "lind3" => Ok(vec![(sz1, rate), (low1, rate)]),
        other => Err(Error::Parse(format!("unknown Lindblad preset '{other}'"))),
    }
}

/// The drift families reported on in the tables: single-qubit mixes
/// `a sx + (1-a) sy` on the first qubit and the spin-chain drifts.
pub fn drift_presets() -> Vec<&'static str> {
    vec![
        "sy",
        "0.2sx+0.8sy",
        "0.5sx+0.5sy",
        "0.8sx+0.2sy",
        "idsy",
        "sysy",
        "0.1sxsx+0.8sysy+0.1szsz",
        "0.1sxsx+0.6sysy+0.3szsz",
        "0.2sxsx+0.6sysy+0.2szsz",
        "0.3sxsx+0.6sysy+0.1szsz",
    ]
}
