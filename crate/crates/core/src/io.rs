//! Binary containers. Every file is a 4-byte magic, a little-endian `u32` JSON
//! header length, the JSON header, then a little-endian numeric payload.
//!
//! - `GSF1`: grid series, `f32` payload in `[t][row][col][channel]` order.
//! - `CAE1`: autoencoder, `f64` weights then biases per bank (encoder, decoder, output).
//! - `ESN1`: reservoir ensemble; reservoir matrices are regenerated from the member
//!   seeds, the payload holds reductions, standardizers, and readouts as `f64`.
//! - `CSR1`: combined model, a header followed by embedded `CAE1` and `ESN1` blocks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cae::{CaeConfig, CaeModel};
use crate::error::{CesarError, Result};
use crate::esn::{Eof, EsnConfig, EsnEnsemble, EsnMember, Standardizer};
use crate::pipeline::CesarModel;
use crate::series::{GridSeries, Normalization};
use crate::tensor::Field3;

pub const GSF_MAGIC: &[u8; 4] = b"GSF1";
pub const CAE_MAGIC: &[u8; 4] = b"CAE1";
pub const ESN_MAGIC: &[u8; 4] = b"ESN1";
pub const CSR_MAGIC: &[u8; 4] = b"CSR1";

fn write_header<W: Write, H: Serialize>(w: &mut W, magic: &[u8; 4], header: &H) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| CesarError::Format("header exceeds 4 GiB".into()))?;
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(len)?;
    w.write_all(&json)?;
    Ok(())
}

fn read_header<R: Read, H: DeserializeOwned>(r: &mut R, magic: &[u8; 4]) -> Result<H> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)
        .map_err(|_| CesarError::Format("file is too short for a magic number".into()))?;
    if &got != magic {
        return Err(CesarError::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| CesarError::Format("truncated header".into()))?;
    Ok(serde_json::from_slice(&json)?)
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)
        .map_err(|_| CesarError::Format("truncated payload".into()))?;
    Ok(out)
}

fn ensure_consumed<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(CesarError::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        CesarError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

#[derive(Serialize, Deserialize)]
struct GsfHeader {
    dims: [usize; 4],
    dtype: String,
    dt: f64,
    var_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm: Option<Normalization>,
}

/// Writes values rounded to `f32`.
pub fn write_gsf<W: Write>(w: &mut W, series: &GridSeries) -> Result<()> {
    series.validate()?;
    let header = GsfHeader {
        dims: series.dims(),
        dtype: "f32".into(),
        dt: series.dt,
        var_names: series.var_names.clone(),
        height_m: series.height_m,
        norm: series.norm.clone(),
    };
    write_header(w, GSF_MAGIC, &header)?;
    for f in &series.frames {
        for &v in f.as_slice() {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

pub fn read_gsf<R: Read>(r: &mut R) -> Result<GridSeries> {
    let header: GsfHeader = read_header(r, GSF_MAGIC)?;
    if header.dtype != "f32" {
        return Err(CesarError::Format(format!("unsupported dtype {}", header.dtype)));
    }
    let [t, m, n, p] = header.dims;
    if t == 0 || m == 0 || n == 0 || p == 0 {
        return Err(CesarError::Format(format!("invalid dims {:?}", header.dims)));
    }
    let mut frames = Vec::with_capacity(t);
    let mut buf = vec![0f32; m * n * p];
    for _ in 0..t {
        r.read_f32_into::<LittleEndian>(&mut buf)
            .map_err(|_| CesarError::Format("payload is shorter than dims imply".into()))?;
        frames.push(Field3::from_vec(m, n, p, buf.iter().map(|&v| f64::from(v)).collect())?);
    }
    ensure_consumed(r)?;
    let series = GridSeries {
        frames,
        dt: header.dt,
        var_names: header.var_names,
        height_m: header.height_m,
        norm: header.norm,
    };
    series.validate()?;
    Ok(series)
}

pub fn save_gsf(path: &Path, series: &GridSeries) -> Result<()> {
    let mut w = create(path)?;
    write_gsf(&mut w, series)?;
    w.flush()?;
    Ok(())
}

pub fn load_gsf(path: &Path) -> Result<GridSeries> {
    read_gsf(&mut open(path)?)
}

#[derive(Serialize, Deserialize)]
struct CaeHeader {
    config: CaeConfig,
    /// `[k, F_in, F_out]` per bank in payload order.
    shapes: Vec<[usize; 3]>,
    seed: u64,
    loss_history: Vec<f64>,
}

pub fn write_cae<W: Write>(w: &mut W, model: &CaeModel) -> Result<()> {
    let header = CaeHeader {
        config: model.config.clone(),
        shapes: model
            .banks()
            .map(|b| [b.kernel(), b.in_channels(), b.out_channels()])
            .collect(),
        seed: model.config.seed,
        loss_history: model.loss_history.clone(),
    };
    write_header(w, CAE_MAGIC, &header)?;
    for bank in model.banks() {
        write_f64s(w, bank.weights())?;
        write_f64s(w, bank.biases())?;
    }
    Ok(())
}

pub fn read_cae<R: Read>(r: &mut R) -> Result<CaeModel> {
    let header: CaeHeader = read_header(r, CAE_MAGIC)?;
    let mut model = CaeModel::zeros(header.config)?;
    let expected: Vec<[usize; 3]> = model
        .banks()
        .map(|b| [b.kernel(), b.in_channels(), b.out_channels()])
        .collect();
    if expected != header.shapes {
        return Err(CesarError::Format("bank shapes do not match the configuration".into()));
    }
    for bank in model.banks_mut() {
        let (w, b) = bank.params_mut();
        r.read_f64_into::<LittleEndian>(w)
            .map_err(|_| CesarError::Format("truncated weights".into()))?;
        r.read_f64_into::<LittleEndian>(b)
            .map_err(|_| CesarError::Format("truncated biases".into()))?;
    }
    model.loss_history = header.loss_history;
    Ok(model)
}

pub fn save_cae(path: &Path, model: &CaeModel) -> Result<()> {
    let mut w = create(path)?;
    write_cae(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_cae(path: &Path) -> Result<CaeModel> {
    let mut r = open(path)?;
    let m = read_cae(&mut r)?;
    ensure_consumed(&mut r)?;
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct EofShape {
    inputs: usize,
    rank: usize,
    singular_values: usize,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
struct MemberHeader {
    seed: u64,
    residual_variance: f64,
    eofs: Vec<EofShape>,
    standardizer_dims: Vec<usize>,
    readout: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct EsnHeader {
    config: EsnConfig,
    latent_dim: usize,
    leak_rate: f64,
    scaling: Vec<f64>,
    validation_mse: Option<f64>,
    members: Vec<MemberHeader>,
}

pub fn write_esn<W: Write>(w: &mut W, ensemble: &EsnEnsemble) -> Result<()> {
    let members = ensemble
        .members
        .iter()
        .map(|m| MemberHeader {
            seed: m.seed,
            residual_variance: m.residual_variance,
            eofs: m
                .eofs
                .iter()
                .map(|e| EofShape {
                    inputs: e.input_dim(),
                    rank: e.rank(),
                    singular_values: e.singular_values.len(),
                    degenerate: e.degenerate,
                })
                .collect(),
            standardizer_dims: m.standardizers.iter().map(|s| s.mean.len()).collect(),
            readout: [m.readout.nrows(), m.readout.ncols()],
        })
        .collect();
    let header = EsnHeader {
        config: ensemble.config.clone(),
        latent_dim: ensemble.latent_dim,
        leak_rate: ensemble.leak_rate,
        scaling: ensemble.scaling.clone(),
        validation_mse: ensemble.validation_mse,
        members,
    };
    write_header(w, ESN_MAGIC, &header)?;
    for m in &ensemble.members {
        for e in &m.eofs {
            write_f64s(w, &e.mean)?;
            write_f64s(w, e.basis.as_slice())?;
            write_f64s(w, &e.singular_values)?;
        }
        for s in &m.standardizers {
            write_f64s(w, &s.mean)?;
            write_f64s(w, &s.sd)?;
            write_f64s(w, &[s.target_sd])?;
        }
        write_f64s(w, m.readout.as_slice())?;
    }
    Ok(())
}

pub fn read_esn<R: Read>(r: &mut R) -> Result<EsnEnsemble> {
    let header: EsnHeader = read_header(r, ESN_MAGIC)?;
    header.config.validate()?;
    let mut members = Vec::with_capacity(header.members.len());
    for mh in header.members {
        let mut eofs = Vec::with_capacity(mh.eofs.len());
        for shape in &mh.eofs {
            let mean = read_f64s(r, shape.inputs)?;
            let basis = DMatrix::from_vec(shape.inputs, shape.rank, read_f64s(r, shape.inputs * shape.rank)?);
            let singular_values = read_f64s(r, shape.singular_values)?;
            eofs.push(Eof {
                mean,
                basis,
                singular_values,
                degenerate: shape.degenerate,
            });
        }
        let mut standardizers = Vec::with_capacity(mh.standardizer_dims.len());
        for &d in &mh.standardizer_dims {
            let mean = read_f64s(r, d)?;
            let sd = read_f64s(r, d)?;
            let target_sd = read_f64s(r, 1)?[0];
            standardizers.push(Standardizer { mean, sd, target_sd });
        }
        let [rows, cols] = mh.readout;
        let readout = DMatrix::from_vec(rows, cols, read_f64s(r, rows * cols)?);
        members.push(EsnMember {
            seed: mh.seed,
            layers: Vec::new(),
            leak_rate: header.leak_rate,
            scaling: header.scaling.clone(),
            lags: header.config.lags,
            intercept: header.config.intercept,
            eofs,
            standardizers,
            readout,
            residual_variance: mh.residual_variance,
        });
    }
    let mut ensemble = EsnEnsemble {
        config: header.config,
        latent_dim: header.latent_dim,
        leak_rate: header.leak_rate,
        scaling: header.scaling,
        validation_mse: header.validation_mse,
        members,
    };
    ensemble.regenerate_layers();
    Ok(ensemble)
}

pub fn save_esn(path: &Path, ensemble: &EsnEnsemble) -> Result<()> {
    let mut w = create(path)?;
    write_esn(&mut w, ensemble)?;
    w.flush()?;
    Ok(())
}

pub fn load_esn(path: &Path) -> Result<EsnEnsemble> {
    let mut r = open(path)?;
    let e = read_esn(&mut r)?;
    ensure_consumed(&mut r)?;
    Ok(e)
}

#[derive(Serialize, Deserialize)]
struct CsrHeader {
    train_frames: usize,
    norm: Normalization,
    observation_variance: f64,
    state_variance: f64,
}

pub fn write_model<W: Write>(w: &mut W, model: &CesarModel) -> Result<()> {
    let header = CsrHeader {
        train_frames: model.train_frames,
        norm: model.norm.clone(),
        observation_variance: model.observation_variance,
        state_variance: model.state_variance,
    };
    write_header(w, CSR_MAGIC, &header)?;
    write_cae(w, &model.cae)?;
    write_esn(w, &model.esn)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<CesarModel> {
    let header: CsrHeader = read_header(r, CSR_MAGIC)?;
    let cae = read_cae(r)?;
    let esn = read_esn(r)?;
    if esn.latent_dim != cae.config.latent_len() {
        return Err(CesarError::Format(format!(
            "reservoir latent size {} does not match the autoencoder's {}",
            esn.latent_dim,
            cae.config.latent_len()
        )));
    }
    Ok(CesarModel {
        cae,
        esn,
        norm: header.norm,
        train_frames: header.train_frames,
        observation_variance: header.observation_variance,
        state_variance: header.state_variance,
    })
}

pub fn save_model(path: &Path, model: &CesarModel) -> Result<()> {
    let mut w = create(path)?;
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CesarModel> {
    let mut r = open(path)?;
    let m = read_model(&mut r)?;
    ensure_consumed(&mut r)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cae::train_on_frames;
    use crate::rng::seeded;
    use rand::Rng;

    fn series() -> GridSeries {
        let mut rng = seeded(1);
        let frames = (0..3)
            .map(|_| Field3::from_vec(2, 3, 2, (0..12).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap())
            .collect();
        let mut s = GridSeries::new(frames, 0.01, vec!["u".into(), "v".into()]).unwrap();
        s.height_m = Some(10.0);
        s
    }

    fn bytes_of(f: impl Fn(&mut Vec<u8>) -> Result<()>) -> Vec<u8> {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        buf
    }

    #[test]
    fn gsf_round_trip_is_exact_at_f32() {
        let s = series().normalize(2).unwrap();
        let a = bytes_of(|b| write_gsf(b, &s));
        let back = read_gsf(&mut a.as_slice()).unwrap();
        for (x, y) in back.frames.iter().zip(&s.frames) {
            for (p, q) in x.as_slice().iter().zip(y.as_slice()) {
                assert_eq!(*p, f64::from(*q as f32));
            }
        }
        assert_eq!(back.norm, s.norm);
        assert_eq!(back.height_m, Some(10.0));
        let b = bytes_of(|buf| write_gsf(buf, &back));
        assert_eq!(a, b);
        let header_len = u32::from_le_bytes(a[4..8].try_into().unwrap()) as usize;
        assert_eq!(a.len() - 8 - header_len, 4 * 3 * 2 * 3 * 2);
    }

    #[test]
    fn gsf_rejects_bad_magic_and_truncation() {
        let a = bytes_of(|b| write_gsf(b, &series()));
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(matches!(read_gsf(&mut bad.as_slice()), Err(CesarError::Format(_))));
        assert!(matches!(read_gsf(&mut &a[..a.len() - 1]), Err(CesarError::Format(_))));
    }

    #[test]
    fn cae_round_trip_is_bit_exact() {
        let config = CaeConfig {
            input_height: 4,
            input_width: 4,
            input_channels: 1,
            filters: vec![2],
            epochs: 2,
            batch_size: 1,
            ..CaeConfig::burgers()
        };
        let frames = vec![Field3::filled(4, 4, 1, 0.3), Field3::filled(4, 4, 1, 0.6)];
        let m = train_on_frames(&frames, &config).unwrap();
        let a = bytes_of(|b| write_cae(b, &m));
        let back = read_cae(&mut a.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(a, bytes_of(|b| write_cae(b, &back)));
    }

    #[test]
    fn esn_round_trip_regenerates_reservoirs() {
        let latents: Vec<Vec<f64>> = (0..40).map(|t| vec![(t as f64 * 0.3).sin(), (t as f64 * 0.2).cos()]).collect();
        let config = EsnConfig {
            reservoir_size: 12,
            reduced_size: 4,
            ensemble_size: 2,
            tune: false,
            ..EsnConfig::default()
        }
        .with_depth(2);
        let e = EsnEnsemble::fit(&config, &latents).unwrap();
        let a = bytes_of(|b| write_esn(b, &e));
        let back = read_esn(&mut a.as_slice()).unwrap();
        assert_eq!(back, e);
        for (x, y) in back.members.iter().zip(&e.members) {
            assert_eq!(x.layers, y.layers);
        }
        assert_eq!(a, bytes_of(|b| write_esn(b, &back)));
    }
}
