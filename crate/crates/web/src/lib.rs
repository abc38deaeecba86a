//! Browser front end for the simulator. Three operations are exposed:
//! DMRS autocorrelation, a channel snapshot, and a per-subframe comparison
//! of the channel estimators.

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use cv2x_chanest::chanest::channel_mse;
use cv2x_chanest::dmrs::{periodic_correlation, zc_length, zc_root_sequence};
use cv2x_chanest::grid::{N_SUBCARRIERS, N_SYMBOLS};
use cv2x_chanest::harness::link::true_noise_variance;
use cv2x_chanest::harness::metrics::evm;
use cv2x_chanest::harness::{Link, RunConfig};
use cv2x_chanest::nn::{Checkpoint, Model};
use cv2x_chanest::transport::block_error;

/// Constellation points returned per estimator.
const CONSTELLATION_POINTS: usize = 576;

/// `|r(l)| / N` of the root sequence over every lag `l`.
pub fn autocorrelation(root: usize) -> Result<Vec<f64>, String> {
    let n = zc_length(N_SUBCARRIERS).map_err(|e| e.to_string())?;
    let x = zc_root_sequence(root, n).map_err(|e| e.to_string())?;
    Ok(periodic_correlation(&x, &x).iter().map(|c| c.norm() / n as f64).collect())
}

#[wasm_bindgen]
pub fn dmrs_autocorrelation(root: u32) -> Result<Vec<f64>, JsError> {
    autocorrelation(root as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn grid_shape() -> Vec<u32> {
    vec![N_SUBCARRIERS as u32, N_SYMBOLS as u32]
}

/// Result of one subframe scored by every available estimator.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Comparison {
    names: Vec<String>,
    mse: Vec<f64>,
    evm: Vec<f64>,
    errors: Vec<u8>,
    points: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl Comparison {
    pub fn estimators(&self) -> Vec<String> {
        self.names.clone()
    }

    /// Channel MSE against the true response.
    pub fn mse(&self) -> Vec<f64> {
        self.mse.clone()
    }

    pub fn evm_pct(&self) -> Vec<f64> {
        self.evm.clone()
    }

    /// 1 where the transport block failed.
    pub fn block_errors(&self) -> Vec<u8> {
        self.errors.clone()
    }

    /// Equalized symbols of estimator `i` as interleaved re/im.
    pub fn constellation(&self, i: usize) -> Vec<f64> {
        self.points.get(i).cloned().unwrap_or_default()
    }
}

#[wasm_bindgen]
pub struct Demo {
    link: Link,
    model: Option<Model<f32>>,
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo { link: Link::new(&RunConfig::default()).expect("default configuration is valid"), model: None }
    }

    /// Loads a trained checkpoint; returns its parameter count.
    pub fn load_model(&mut self, bytes: &[u8]) -> Result<u32, JsError> {
        self.load_checkpoint(bytes).map_err(|e| JsError::new(&e))
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    /// `|H|` of the first antenna, symbol-major: the true response followed
    /// by the interpolated raw LS estimate, each 14 x 576 values.
    pub fn channel_snapshot(&self, speed_kmph: f64, snr_db: f64, seed: u32) -> Result<Vec<f32>, JsError> {
        self.snapshot(speed_kmph, snr_db, seed as u64).map_err(|e| JsError::new(&e))
    }

    pub fn compare(&mut self, speed_kmph: f64, snr_db: f64, seed: u32) -> Result<Comparison, JsError> {
        self.run_comparison(speed_kmph, snr_db, seed as u64).map_err(|e| JsError::new(&e))
    }
}

impl Demo {
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<u32, String> {
        let ck = Checkpoint::from_bytes(bytes)?;
        let n = ck.model.param_count() as u32;
        self.model = Some(ck.model);
        Ok(n)
    }

    pub fn snapshot(&self, speed_kmph: f64, snr_db: f64, seed: u64) -> Result<Vec<f32>, String> {
        let rec = self.link.simulate(seed, speed_kmph, snr_db, 0).map_err(|e| e.to_string())?;
        Ok(rec.h_perf[0].cells().iter().chain(rec.h_noisy[0].cells()).map(|v| v.norm() as f32).collect())
    }

    pub fn run_comparison(&mut self, speed_kmph: f64, snr_db: f64, seed: u64) -> Result<Comparison, String> {
        let link = &self.link;
        let rec = link.simulate(seed, speed_kmph, snr_db, 0).map_err(|e| e.to_string())?;
        let tx = link.data_symbols(&rec.payload).map_err(|e| e.to_string())?;
        let (h_ls, nv) = link.ls_estimate(&rec.rx).map_err(|e| e.to_string())?;
        let mut cands = vec![
            ("perfect".to_string(), rec.h_perf.clone(), true_noise_variance(snr_db)),
            ("ls".to_string(), h_ls, nv),
        ];
        if let Some(model) = &mut self.model {
            let pred = rec.h_noisy.iter().map(|h| model.predict(h)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
            cands.push(("ann".to_string(), pred, nv));
        }
        let mut out = Comparison { names: vec![], mse: vec![], evm: vec![], errors: vec![], points: vec![] };
        for (name, h, nv) in cands {
            let r = link.receive(&rec.rx, &h, nv).map_err(|e| e.to_string())?;
            out.mse.push(channel_mse(&h, &rec.h_perf));
            out.evm.push(evm(&tx, &r.symbols).map_err(|e| e.to_string())?);
            out.errors.push(block_error(&rec.payload, &r.decoded.payload, r.decoded.crc_ok) as u8);
            out.points.push(r.symbols.iter().take(CONSTELLATION_POINTS).flat_map(|s: &Complex64| [s.re, s.im]).collect());
            out.names.push(name);
        }
        Ok(out)
    }
}
