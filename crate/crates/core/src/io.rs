//! JSON wire formats. Every type validates on the way in.
//!
//! - `JointDist`: `{"rows": [labels], "cols": [labels], "mass": [[..], ..]}`;
//!   labels are optional and default to `"0", "1", ...`.
//! - `Kernel`: `{"from": [labels], "to": [labels], "rows": [[..], ..]}`.
//! - `Marginal`: `{"labels": [..], "probs": [..]}`.
//! - `FactoredDist`: `{"axes": [{"name": .., "labels": [..]}], "mass": [..]}`
//!   with `mass` flattened row-major in the listed axis order.
//! - `ChainSpec`: `{"pxy": JointDist, "kzy": Kernel}`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dpi::ChainSpec;
use crate::linalg::Matrix;
use crate::prob::{Alphabet, FactoredDist, JointDist, Kernel, Marginal};

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn from_rows(rows: &[Vec<f64>]) -> crate::Result<Matrix> {
    Matrix::from_rows(rows)
}

fn labels_or_range(l: Option<Alphabet>, n: usize) -> Alphabet {
    l.unwrap_or_else(|| Alphabet::range(n))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Alphabet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<Alphabet>,
    mass: Vec<Vec<f64>>,
}

impl Serialize for JointDist {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        JointWire {
            rows: Some(self.rows().clone()),
            cols: Some(self.cols().clone()),
            mass: to_rows(self.mass()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = JointWire::deserialize(d)?;
        let m = from_rows(&w.mass).map_err(D::Error::custom)?;
        let (r, c) = m.shape();
        JointDist::new(m, labels_or_range(w.rows, r), labels_or_range(w.cols, c)).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<Alphabet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<Alphabet>,
    rows: Vec<Vec<f64>>,
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KernelWire {
            from: Some(self.from().clone()),
            to: Some(self.to().clone()),
            rows: to_rows(self.matrix()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = KernelWire::deserialize(d)?;
        let m = from_rows(&w.rows).map_err(D::Error::custom)?;
        let (r, c) = m.shape();
        Kernel::new(labels_or_range(w.from, r), labels_or_range(w.to, c), m).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Alphabet>,
    probs: Vec<f64>,
}

impl Serialize for Marginal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MarginalWire {
            labels: Some(self.alphabet().clone()),
            probs: self.probs().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Marginal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = MarginalWire::deserialize(d)?;
        let n = w.probs.len();
        Marginal::new(labels_or_range(w.labels, n), w.probs).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisWire {
    name: String,
    labels: Alphabet,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactoredWire {
    axes: Vec<AxisWire>,
    mass: Vec<f64>,
}

impl Serialize for FactoredDist {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FactoredWire {
            axes: self
                .axes()
                .iter()
                .map(|a| AxisWire {
                    name: a.name.clone(),
                    labels: a.alphabet.clone(),
                })
                .collect(),
            mass: self.mass().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactoredDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = FactoredWire::deserialize(d)?;
        FactoredDist::new(w.axes.into_iter().map(|a| (a.name, a.labels)).collect(), w.mass)
            .map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainWire {
    pxy: JointDist,
    kzy: Kernel,
}

impl Serialize for ChainSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ChainWire {
            pxy: self.pxy.clone(),
            kzy: self.kzy.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChainSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = ChainWire::deserialize(d)?;
        ChainSpec::new(w.pxy, w.kzy).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_round_trip_and_defaults() {
        let j = JointDist::dsbs(0.25);
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<JointDist>(&s).unwrap(), j);
        let bare: JointDist = serde_json::from_str(r#"{"mass": [[0.375, 0.125], [0.125, 0.375]]}"#).unwrap();
        assert_eq!(bare, j);
        assert!(serde_json::from_str::<JointDist>(r#"{"mass": [[0.5, 0.6]]}"#).is_err());
        assert!(serde_json::from_str::<JointDist>(r#"{"mass": [[1.0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn other_round_trips() {
        let k = Kernel::bsc(0.1);
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<Kernel>(&s).unwrap(), k);
        assert!(serde_json::from_str::<Kernel>(r#"{"rows": [[0.5, 0.4]]}"#).is_err());

        let m = Marginal::from_probs(&[0.2, 0.8]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Marginal>(&s).unwrap(), m);

        let f = JointDist::dsbs(0.1).to_factored("u1", "v1").unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains(r#""name":"u1""#));
        assert_eq!(serde_json::from_str::<FactoredDist>(&s).unwrap(), f);

        let c = ChainSpec::new(JointDist::dsbs(0.25), Kernel::bsc(0.1)).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: ChainSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back.pxy, c.pxy);
    }
}
