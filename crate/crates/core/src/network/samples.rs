use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    /// Before the nonlinearity.
    Pre,
    /// After the nonlinearity.
    Post,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Pre => "pre",
            UnitKind::Post => "post",
        })
    }
}

impl FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(UnitKind::Pre),
            "post" => Ok(UnitKind::Post),
            _ => Err(Error::invalid(format!("unit kind must be pre or post, got {s:?}"))),
        }
    }
}

/// A real number stored as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub sign: i8,
    pub log_mag: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog {
                sign: if v > 0.0 { 1 } else { -1 },
                log_mag: v.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.log_mag.exp()
    }
}

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub input_hash: String,
    pub seed: u64,
    /// Log of the total rescale factor that was applied upstream of this unit
    /// and removed from the stored values. Zero without rescaling.
    pub log_rescale: f64,
}

impl Provenance {
    pub fn synthetic(label: &str, seed: u64) -> Self {
        Provenance {
            config_hash: label.to_string(),
            input_hash: "none".to_string(),
            seed,
            log_rescale: 0.0,
        }
    }
}

/// Monte-Carlo draws of one unit of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSampleSet {
    pub layer: usize,
    pub kind: UnitKind,
    pub unit_index: usize,
    pub values: Vec<SignedLog>,
    pub provenance: Provenance,
}

impl UnitSampleSet {
    pub fn from_f64s(
        layer: usize,
        kind: UnitKind,
        unit_index: usize,
        raw: &[f64],
        provenance: Provenance,
    ) -> Self {
        UnitSampleSet {
            layer,
            kind,
            unit_index,
            values: raw.iter().copied().map(SignedLog::from_f64).collect(),
            provenance,
        }
    }

    /// Wraps samples that did not come from a network, e.g. reference
    /// distributions in tests.
    pub fn synthetic(label: &str, raw: &[f64]) -> Self {
        Self::from_f64s(0, UnitKind::Pre, 0, raw, Provenance::synthetic(label, 0))
    }

    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    pub fn decoded(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }

    /// `log |x_i|` for every sample; `-inf` for zeros.
    pub fn log_abs(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.log_mag)
    }

    /// The same samples multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("scale factor must be positive and finite"));
        }
        let shift = c.ln();
        let mut out = self.clone();
        for v in &mut out.values {
            v.log_mag += shift;
        }
        Ok(out)
    }

    /// Samples with every sign flipped.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            v.sign = -v.sign;
        }
        out
    }

    /// CSV with `# key=value` provenance comments and `sign,log_magnitude`
    /// rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# layer={} kind={} unit={} n_samples={}",
            self.layer,
            self.kind,
            self.unit_index,
            self.n_samples()
        )?;
        let p = &self.provenance;
        writeln!(
            w,
            "# config_hash={} input_hash={} seed={} log_rescale={}",
            p.config_hash, p.input_hash, p.seed, p.log_rescale
        )?;
        writeln!(w, "sign,log_magnitude")?;
        for v in &self.values {
            writeln!(w, "{},{}", v.sign, v.log_mag)?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::invalid(format!("sample csv: {msg}"));
        let mut fields = std::collections::HashMap::new();
        let mut values = Vec::new();
        let mut saw_header = false;
        for line in text.lines() {
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        fields.insert(k.to_string(), v.to_string());
                    }
                }
            } else if !saw_header {
                if line.trim() != "sign,log_magnitude" {
                    return Err(bad("missing header"));
                }
                saw_header = true;
            } else if !line.is_empty() {
                let (s, l) = line.split_once(',').ok_or_else(|| bad("malformed row"))?;
                values.push(SignedLog {
                    sign: s.parse().map_err(|_| bad("bad sign"))?,
                    log_mag: l.parse().map_err(|_| bad("bad log magnitude"))?,
                });
            }
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(&format!("missing {k}")));
        let n: usize = get("n_samples")?.parse().map_err(|_| bad("bad n_samples"))?;
        if n != values.len() {
            return Err(bad("n_samples does not match row count"));
        }
        Ok(UnitSampleSet {
            layer: get("layer")?.parse().map_err(|_| bad("bad layer"))?,
            kind: get("kind")?.parse()?,
            unit_index: get("unit")?.parse().map_err(|_| bad("bad unit"))?,
            values,
            provenance: Provenance {
                config_hash: get("config_hash")?,
                input_hash: get("input_hash")?,
                seed: get("seed")?.parse().map_err(|_| bad("bad seed"))?,
                log_rescale: get("log_rescale")?.parse().map_err(|_| bad("bad log_rescale"))?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn signed_log_round_trip(v in prop_oneof![
            -1e300f64..1e300,
            -1e-300f64..1e-300,
            Just(0.0),
            Just(f64::MIN_POSITIVE),
        ]) {
            let back = SignedLog::from_f64(v).to_f64();
            if v == 0.0 {
                prop_assert_eq!(back, 0.0);
            } else {
                prop_assert!(((back - v) / v).abs() <= 1e-12, "{} -> {}", v, back);
            }
        }

        #[test]
        fn csv_round_trip(raw in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let set = UnitSampleSet::synthetic("t", &raw);
            let mut buf = Vec::new();
            set.write_csv(&mut buf).unwrap();
            let back = UnitSampleSet::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, set);
        }
    }

    #[test]
    fn scaling_shifts_logs() {
        let s = UnitSampleSet::synthetic("t", &[1.0, -2.0, 0.0]);
        let t = s.scaled(3.0).unwrap();
        assert_eq!(t.decoded()[2], 0.0);
        assert!((t.decoded()[1] + 6.0).abs() < 1e-12);
        assert!(s.scaled(0.0).is_err());
        assert_eq!(s.negated().decoded()[0], -1.0);
    }
}
