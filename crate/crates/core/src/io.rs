//! Versioned JSON model files.
//!
//! Matrices are stored row-major as nested arrays and every float is written
//! with 17 significant digits, so a save/load cycle reproduces `f64` weights
//! exactly. Reduced-model files extend the full-model record with their own
//! fields; `kind` tells them apart.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::deim::{DeimEsn, DeimOperators};
use crate::error::{EsnError, Result};
use crate::esn::{EchoStateNetwork, HyperParams};
use crate::pod::{PodBasis, PodEsn};
use crate::scalar::Scalar;
use crate::TOOLKIT_VERSION;

pub const FORMAT_VERSION: u32 = 1;

/// Where a file came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            seed,
            config_hash: config_hash.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Esn,
    Pod,
    Deim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnRecord {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hyper: HyperParams,
    pub w_rr: Vec<Vec<f64>>,
    pub w_ir: Vec<Vec<f64>>,
    pub w_br: Vec<f64>,
    pub w_ro: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodRecord {
    #[serde(flatten)]
    pub full: EsnRecord,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    /// Full singular spectrum of the snapshots, when known.
    #[serde(default)]
    pub sigma: Vec<f64>,
    pub energy_kept: Option<f64>,
    pub w_rr_t: Vec<Vec<f64>>,
    pub w_ro_t: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeimRecord {
    #[serde(flatten)]
    pub pod: PodRecord,
    pub deim_cutoff: Option<f64>,
    pub m_d: usize,
    pub pivots: Vec<usize>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "T2")]
    pub t2: Vec<Vec<f64>>,
}

/// A model of any kind, loaded with its full-order parent.
#[derive(Debug, Clone)]
pub enum LoadedModel<T: Scalar> {
    Full(EchoStateNetwork<T>),
    Pod(EchoStateNetwork<T>, PodEsn<T>),
    Deim(EchoStateNetwork<T>, DeimEsn<T>),
}

impl<T: Scalar> LoadedModel<T> {
    pub fn full(&self) -> &EchoStateNetwork<T> {
        match self {
            Self::Full(e) | Self::Pod(e, _) | Self::Deim(e, _) => e,
        }
    }
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Full(_) => ModelKind::Esn,
            Self::Pod(..) => ModelKind::Pod,
            Self::Deim(..) => ModelKind::Deim,
        }
    }
}

pub fn matrix_to_rows<T: Scalar>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

pub fn vector_to_vec<T: Scalar>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Rebuilds a `rows × cols` matrix, rejecting ragged or mis-sized input.
pub fn matrix_from_rows<T: Scalar>(name: &str, data: &[Vec<f64>], rows: usize, cols: usize) -> Result<DMatrix<T>> {
    if data.len() != rows || data.iter().any(|r| r.len() != cols) {
        return Err(EsnError::Format(format!("{name}: expected a {rows}×{cols} matrix")));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| T::of(data[i][j])))
}

fn vector_from_vec<T: Scalar>(name: &str, data: &[f64], len: usize) -> Result<DVector<T>> {
    if data.len() != len {
        return Err(EsnError::Format(format!("{name}: expected {len} entries, got {}", data.len())));
    }
    Ok(DVector::from_iterator(len, data.iter().map(|&v| T::of(v))))
}

impl EsnRecord {
    pub fn from_model<T: Scalar>(esn: &EchoStateNetwork<T>, provenance: Option<Provenance>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Esn,
            hyper: esn.hyper().clone(),
            w_rr: matrix_to_rows(esn.w_rr()),
            w_ir: matrix_to_rows(esn.w_ir()),
            w_br: vector_to_vec(esn.w_br()),
            w_ro: matrix_to_rows(esn.w_ro()),
            provenance,
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<EchoStateNetwork<T>> {
        if self.format_version != FORMAT_VERSION {
            return Err(EsnError::Format(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let h = &self.hyper;
        h.validate()?;
        let n = h.reservoir_size;
        EchoStateNetwork::from_parts(
            matrix_from_rows("w_rr", &self.w_rr, n, n)?,
            matrix_from_rows("w_ir", &self.w_ir, n, h.n_inputs)?,
            vector_from_vec("w_br", &self.w_br, n)?,
            matrix_from_rows("w_ro", &self.w_ro, h.n_outputs, n)?,
            h.clone(),
        )
    }
}

impl PodRecord {
    pub fn from_model<T: Scalar>(
        esn: &EchoStateNetwork<T>,
        pe: &PodEsn<T>,
        basis: Option<&PodBasis<T>>,
        provenance: Option<Provenance>,
    ) -> Self {
        let mut full = EsnRecord::from_model(esn, provenance);
        full.kind = ModelKind::Pod;
        Self {
            full,
            m: pe.reduced_dim(),
            t: matrix_to_rows(pe.basis()),
            sigma: basis.map(|b| vector_to_vec(&b.sigma)).unwrap_or_default(),
            energy_kept: pe.energy_kept().map(|e| e.as_f64()),
            w_rr_t: matrix_to_rows(pe.w_rr_t()),
            w_ro_t: matrix_to_rows(pe.w_ro_t()),
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<(EchoStateNetwork<T>, PodEsn<T>)> {
        let esn = self.full.to_model::<T>()?;
        let h = esn.hyper().clone();
        let n = h.reservoir_size;
        let pe = PodEsn::from_parts(
            matrix_from_rows("T", &self.t, n, self.m)?,
            matrix_from_rows("w_rr_t", &self.w_rr_t, n, self.m)?,
            esn.w_ir().clone(),
            esn.w_br().clone(),
            matrix_from_rows("w_ro_t", &self.w_ro_t, h.n_outputs, self.m)?,
            h,
            self.energy_kept.map(T::of),
        )?;
        Ok((esn, pe))
    }
}

impl DeimRecord {
    pub fn from_model<T: Scalar>(
        esn: &EchoStateNetwork<T>,
        de: &DeimEsn<T>,
        basis: Option<&PodBasis<T>>,
        provenance: Option<Provenance>,
    ) -> Self {
        let mut pod = PodRecord::from_model(esn, de.base(), basis, provenance);
        pod.full.kind = ModelKind::Deim;
        let ops = de.operators();
        Self {
            pod,
            deim_cutoff: de.deim_cutoff(),
            m_d: ops.n_points(),
            pivots: ops.pivots().to_vec(),
            u: matrix_to_rows(ops.basis()),
            t2: matrix_to_rows(ops.t2()),
        }
    }

    /// Rebuilds the operators from `U` and the stored pivots; the stored
    /// `T2` must agree with the recomputed one.
    pub fn to_model<T: Scalar>(&self) -> Result<(EchoStateNetwork<T>, DeimEsn<T>)> {
        let (esn, pe) = self.pod.to_model::<T>()?;
        let n = esn.hyper().reservoir_size;
        let u = matrix_from_rows("U", &self.u, n, self.m_d)?;
        let ops = DeimOperators::with_pivots(u, self.pivots.clone())?;
        let stored: DMatrix<T> = matrix_from_rows("T2", &self.t2, n, self.m_d)?;
        let scale = T::one() + stored.amax();
        if (&stored - ops.t2()).amax() > T::of(1e-8) * scale {
            return Err(EsnError::Format("T2 is inconsistent with U and pivots".into()));
        }
        let de = DeimEsn::from_operators(&pe, ops)?.with_cutoff_label(self.deim_cutoff);
        Ok((esn, de))
    }
}

/// Writes floats with 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundTripFormatter;

impl Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes with [`RoundTripFormatter`]. Non-finite floats are rejected.
pub fn to_writer_exact<W: Write, S: Serialize>(writer: W, value: &S) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, RoundTripFormatter);
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_string_exact<S: Serialize>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    to_writer_exact(&mut buf, value)?;
    String::from_utf8(buf).map_err(|e| EsnError::Format(e.to_string()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| EsnError::Io(format!("{}: {e}", path.display())))
}

pub fn save_exact<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| EsnError::Io(format!("{}: {e}", path.display())))?);
    to_writer_exact(&mut w, value)?;
    w.flush()?;
    Ok(())
}

pub fn load_json<D: DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(open(path.as_ref())?))?)
}

pub fn save_esn<T: Scalar>(path: impl AsRef<Path>, esn: &EchoStateNetwork<T>, prov: Option<Provenance>) -> Result<()> {
    save_exact(path, &EsnRecord::from_model(esn, prov))
}

#[derive(Deserialize)]
struct KindProbe {
    kind: ModelKind,
}

/// Parses any model file; the `kind` field selects the record layout.
pub fn model_from_reader<T: Scalar, R: Read>(mut reader: R) -> Result<LoadedModel<T>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let probe: KindProbe = serde_json::from_str(&text)?;
    Ok(match probe.kind {
        ModelKind::Esn => LoadedModel::Full(serde_json::from_str::<EsnRecord>(&text)?.to_model()?),
        ModelKind::Pod => {
            let (e, p) = serde_json::from_str::<PodRecord>(&text)?.to_model()?;
            LoadedModel::Pod(e, p)
        }
        ModelKind::Deim => {
            let (e, d) = serde_json::from_str::<DeimRecord>(&text)?.to_model()?;
            LoadedModel::Deim(e, d)
        }
    })
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<LoadedModel<T>> {
    model_from_reader(BufReader::new(open(path.as_ref())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Reservoir;
    use proptest::prelude::*;

    fn trained(n: usize, seed: u64) -> EchoStateNetwork<f64> {
        let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(n, 0.8, 0.9, seed)).unwrap();
        esn.with_readout(DMatrix::from_fn(1, n, |_, j| (j as f64 * 0.77).sin() / 3.0))
            .unwrap()
    }

    fn reduced(esn: &EchoStateNetwork<f64>) -> (PodBasis<f64>, PodEsn<f64>, DeimEsn<f64>) {
        let u = DMatrix::from_fn(1, 150, |_, k| (k as f64 * 0.3).sin());
        let basis = PodBasis::from_snapshots(&esn.run_states(&u, &esn.zero_state()).unwrap()).unwrap();
        let pe = PodEsn::from_cutoff(esn, &basis, 0.05).unwrap();
        let de = DeimEsn::build(&pe, &basis, 0.01).unwrap();
        (basis, pe, de)
    }

    #[test]
    fn esn_round_trip_is_exact() {
        let esn = trained(15, 3);
        let text = to_string_exact(&EsnRecord::from_model(&esn, Some(Provenance::new(3, "abc")))).unwrap();
        assert!(text.contains("\"format_version\":1"));
        match model_from_reader::<f64, _>(text.as_bytes()).unwrap() {
            LoadedModel::Full(back) => assert_eq!(back, esn),
            other => panic!("wrong kind {:?}", other.kind()),
        }
    }

    #[test]
    fn pod_and_deim_round_trip_exactly() {
        let esn = trained(20, 4);
        let (basis, pe, de) = reduced(&esn);
        let text = to_string_exact(&PodRecord::from_model(&esn, &pe, Some(&basis), None)).unwrap();
        assert!(text.contains("\"T\":"));
        let LoadedModel::Pod(e2, p2) = model_from_reader::<f64, _>(text.as_bytes()).unwrap() else {
            panic!("expected a POD model");
        };
        assert_eq!(e2, esn);
        assert_eq!(p2, pe);

        let text = to_string_exact(&DeimRecord::from_model(&esn, &de, Some(&basis), None)).unwrap();
        assert!(text.contains("\"T2\":") && text.contains("\"pivots\":"));
        let LoadedModel::Deim(_, d2) = model_from_reader::<f64, _>(text.as_bytes()).unwrap() else {
            panic!("expected a DEIM model");
        };
        assert_eq!(d2.operators().pivots(), de.operators().pivots());
        assert_eq!(d2.lift(), de.lift());
        let z = pe.project(&DVector::from_element(20, 0.1)).unwrap();
        let u = DVector::from_element(1, 0.4);
        assert_eq!(d2.step(&z, &u).unwrap(), de.step(&z, &u).unwrap());
    }

    #[test]
    fn rejects_malformed_files() {
        let esn = trained(4, 1);
        let mut rec = EsnRecord::from_model(&esn, None);
        rec.w_rr[1].pop();
        assert!(matches!(rec.to_model::<f64>(), Err(EsnError::Format(_))));
        let mut rec = EsnRecord::from_model(&esn, None);
        rec.format_version = 99;
        assert!(rec.to_model::<f64>().is_err());
        assert!(matches!(
            model_from_reader::<f64, _>("{\"kind\":\"esn\"".as_bytes()),
            Err(EsnError::Format(_))
        ));
        assert!(matches!(load_model::<f64>("/nonexistent/model.json"), Err(EsnError::Io(_))));
    }

    #[test]
    fn f32_models_load_from_f64_files() {
        let esn = trained(6, 2);
        let text = to_string_exact(&EsnRecord::from_model(&esn, None)).unwrap();
        let back = model_from_reader::<f32, _>(text.as_bytes()).unwrap();
        assert_eq!(back.full().w_rr()[(1, 2)], esn.w_rr()[(1, 2)] as f32);
    }

    proptest! {
        #[test]
        fn floats_round_trip_bitwise(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..50)) {
            let text = to_string_exact(&v).unwrap();
            let back: Vec<f64> = serde_json::from_str(&text).unwrap();
            for (a, b) in v.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
