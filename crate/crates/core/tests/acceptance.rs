//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. The slow criteria train and evaluate a model on a
//! reduced dataset; expect tens of minutes on one core.
//!
//! Numeric arguments select criteria, e.g.
//! `cargo test --test acceptance -- 1 2 10`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cv2x_chanest::channel::{draw_taps, ChannelConfig};
use cv2x_chanest::dmrs::zc_root_sequence;
use cv2x_chanest::grid::ResourceGrid;
use cv2x_chanest::harness::config::Estimator;
use cv2x_chanest::harness::run::ChannelMseRow;
use cv2x_chanest::harness::{generate_dataset, run_eval, train_model, Link, MetricsRow, RunConfig, RunPaths};
use cv2x_chanest::nn::layers::{
    batchnorm_backward, batchnorm_forward, conv_backward, conv_forward, dense_backward, dense_forward, relu_backward,
    relu_forward, BatchNorm2d, Conv2d, Dense,
};
use cv2x_chanest::nn::{build_model, ArchConfig, Mode, Model, Tensor};
use cv2x_chanest::scfdma::{Modem, ModemConfig};
use cv2x_chanest::transport::{block_error, decode_block, encode_block, soft_demap, TransportConfig};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn randn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

// 1

fn cazac() -> Check {
    let n = 571;
    let mut worst_mag: f64 = 0.0;
    let mut worst_side: f64 = 0.0;
    for q in [1usize, 25, 30] {
        let x = zc_root_sequence(q, n).map_err(|e| e.to_string())?;
        for (m, v) in x.iter().enumerate() {
            let m = m as f64;
            let want = Complex64::from_polar(1.0, -PI * q as f64 * m * (m + 1.0) / n as f64);
            if (v - want).norm() > 1e-9 {
                return Err(format!("q={q}: sample {m} differs from the closed form"));
            }
            worst_mag = worst_mag.max((v.norm() - 1.0).abs());
        }
        for lag in 1..n {
            let r: Complex64 = (0..n).map(|i| x[(i + lag) % n] * x[i].conj()).sum();
            worst_side = worst_side.max(r.norm());
        }
    }
    ensure(
        worst_mag <= 1e-12 && worst_side <= 1e-9 * n as f64,
        format!("max ||x|-1| = {worst_mag:.1e}, max sidelobe = {worst_side:.1e} (limit {:.1e})", 1e-9 * n as f64),
    )
}

// 2

fn modem_round_trip() -> Check {
    let modem = Modem::new(ModemConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let grid = ResourceGrid::from_fn(|_, _| randn(&mut rng));
        let back = modem.demodulate(&modem.modulate(&grid)).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&grid));
    }
    ensure(worst < 1e-9, format!("max reconstruction error {worst:.2e} over 100 grids"))
}

// 3

fn static_chain() -> Check {
    let link = Link::new(&RunConfig::default()).map_err(|e| e.to_string())?;
    let mut worst_rel: f64 = 0.0;
    let mut errors = 0;
    for sf in 0..100 {
        let rec = link.simulate(3, 0.0, f64::INFINITY, sf).map_err(|e| e.to_string())?;
        for (est, truth) in rec.h_noisy.iter().zip(&rec.h_perf) {
            let num: f64 = est.cells().iter().zip(truth.cells()).map(|(a, b)| (a - b).norm_sqr()).sum();
            worst_rel = worst_rel.max((num / truth.energy()).sqrt());
        }
        let (h, nv) = link.ls_estimate(&rec.rx).map_err(|e| e.to_string())?;
        let out = link.receive(&rec.rx, &h, nv).map_err(|e| e.to_string())?;
        errors += block_error(&rec.payload, &out.decoded.payload, out.decoded.crc_ok) as usize;
    }
    ensure(
        worst_rel <= 1e-3 && errors == 0,
        format!("worst relative LS error {worst_rel:.2e}, {errors} block errors in 100"),
    )
}

// 4

fn tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Central differences with step 1e-6.
fn central_diff(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = p[i];
            p[i] = v + h;
            let up = f(&p);
            p[i] = v - h;
            let down = f(&p);
            p[i] = v;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6)).fold(0.0, f64::max)
}

fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn with_data(t: &Tensor<f64>, d: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), d.to_vec()).unwrap()
}

fn layer_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let conv = Conv2d::<f64>::init(2, 3, 5, 3, &mut rng).unwrap();
    let x = tensor(&mut rng, [2, 2, 7, 5]);
    let r = tensor(&mut rng, [2, 3, 7, 5]);
    let g = conv_backward(&r, &x, &conv).unwrap();
    let nx = central_diff(x.data(), |d| project(&conv_forward(&with_data(&x, d), &conv).unwrap(), &r));
    let nw = central_diff(&conv.weights, |d| {
        let mut c = conv.clone();
        c.weights = d.to_vec();
        project(&conv_forward(&x, &c).unwrap(), &r)
    });
    let nb = central_diff(&conv.bias, |d| {
        let mut c = conv.clone();
        c.bias = d.to_vec();
        project(&conv_forward(&x, &c).unwrap(), &r)
    });
    out.push(("conv", rel_err(g.grad_x.data(), &nx).max(rel_err(&g.grad_w, &nw)).max(rel_err(&g.grad_b, &nb))));

    let mut bn = BatchNorm2d::<f64>::new(3);
    bn.gamma = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
    bn.beta = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
    let x = tensor(&mut rng, [3, 3, 4, 3]);
    let r = tensor(&mut rng, [3, 3, 4, 3]);
    let mut scratch = bn.clone();
    let (_, cache) = batchnorm_forward(&x, &mut scratch, Mode::Train).unwrap();
    let g = batchnorm_backward(&r, &cache.unwrap(), &bn).unwrap();
    let eval = |b: &BatchNorm2d<f64>, x: &Tensor<f64>| {
        let mut b = b.clone();
        project(&batchnorm_forward(x, &mut b, Mode::Train).unwrap().0, &r)
    };
    let nx = central_diff(x.data(), |d| eval(&bn, &with_data(&x, d)));
    let ng = central_diff(&bn.gamma, |d| {
        let mut b = bn.clone();
        b.gamma = d.to_vec();
        eval(&b, &x)
    });
    let nb = central_diff(&bn.beta, |d| {
        let mut b = bn.clone();
        b.beta = d.to_vec();
        eval(&b, &x)
    });
    out.push((
        "batchnorm",
        rel_err(g.grad_x.data(), &nx).max(rel_err(&g.grad_gamma, &ng)).max(rel_err(&g.grad_beta, &nb)),
    ));

    // keep inputs away from the kink
    let x = tensor(&mut rng, [2, 2, 4, 3]).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let r = tensor(&mut rng, [2, 2, 4, 3]);
    let g = relu_backward(&r, &x);
    let nx = central_diff(x.data(), |d| project(&relu_forward(&with_data(&x, d)), &r));
    out.push(("relu", rel_err(g.data(), &nx)));

    let dense = Dense::<f64>::init(4, 2, &mut rng);
    let x = tensor(&mut rng, [2, 4, 5, 3]);
    let r = tensor(&mut rng, [2, 2, 5, 3]);
    let g = dense_backward(&r, &x, &dense).unwrap();
    let nx = central_diff(x.data(), |d| project(&dense_forward(&with_data(&x, d), &dense).unwrap(), &r));
    let nw = central_diff(&dense.weights, |d| {
        let mut l = dense.clone();
        l.weights = d.to_vec();
        project(&dense_forward(&x, &l).unwrap(), &r)
    });
    let nb = central_diff(&dense.bias, |d| {
        let mut l = dense.clone();
        l.bias = d.to_vec();
        project(&dense_forward(&x, &l).unwrap(), &r)
    });
    out.push(("dense", rel_err(g.grad_x.data(), &nx).max(rel_err(&g.grad_w, &nw)).max(rel_err(&g.grad_b, &nb))));
    out
}

fn end_to_end_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE2E);
    let mut model: Model<f64> = build_model(&ArchConfig::default(), seed).unwrap();
    let x = tensor(&mut rng, [2, 2, 12, 6]);
    let target = tensor(&mut rng, [2, 2, 12, 6]);
    let (_, grads) = model.clone().loss_and_gradients(&x, &target).unwrap();
    let mut worst: f64 = 0.0;
    for (pi, g) in grads.iter().enumerate() {
        let base = model.params()[pi].to_vec();
        let num = central_diff(&base, |d| {
            model.params_mut()[pi].copy_from_slice(d);
            let l = model.clone().loss_and_gradients(&x, &target).unwrap().0;
            model.params_mut()[pi].copy_from_slice(&base);
            l
        });
        worst = worst.max(rel_err(g, &num));
    }
    worst
}

fn gradients() -> Check {
    let mut layer_worst: Vec<(&str, f64)> = Vec::new();
    let mut e2e: f64 = 0.0;
    for seed in 0..10 {
        for (name, e) in layer_errors(seed) {
            match layer_worst.iter_mut().find(|(n, _)| *n == name) {
                Some(w) => w.1 = w.1.max(e),
                None => layer_worst.push((name, e)),
            }
        }
        e2e = e2e.max(end_to_end_error(seed));
    }
    let layers_ok = layer_worst.iter().all(|(_, e)| *e < 1e-4);
    let detail = layer_worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(layers_ok && e2e < 1e-3, format!("{detail}, end-to-end {e2e:.1e} over 10 seeds"))
}

// 5

/// Bessel J0 by the trapezoid rule on `(1/pi) * int_0^pi cos(x sin t) dt`.
fn bessel_j0(x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let s: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * (x * (i as f64 * h).sin()).cos()
        })
        .sum();
    s * h / PI
}

fn doppler_statistics() -> Check {
    let subframes = 2000;
    let lags = 50;
    let dt = 1e-3 / lags as f64;
    let mut cfg = ChannelConfig { speed_kmph: 400.0, ..ChannelConfig::default() };
    let powers = cfg.normalized_powers();
    let fd = cv2x_chanest::channel::doppler_from_speed(400.0, cfg.carrier_freq).unwrap();
    let mut acc = vec![Complex64::new(0.0, 0.0); lags + 1];
    let mut counts = vec![0.0; lags + 1];
    for sf in 0..subframes {
        cfg.seed = 0xD0_0000 + sf;
        for antenna in draw_taps(&cfg).map_err(|e| e.to_string())? {
            for (tap, p) in antenna.iter().zip(&powers) {
                let g = tap.gains_uniform(0.0, dt, lags + 1);
                for m in 0..=lags {
                    for t in 0..=lags - m {
                        acc[m] += g[t + m] * g[t].conj() / p;
                        counts[m] += 1.0;
                    }
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for m in 0..=lags {
        let est = acc[m].re / counts[m];
        worst = worst.max((est - bessel_j0(2.0 * PI * fd * m as f64 * dt)).abs());
    }
    ensure(
        worst <= 0.05,
        format!("max |R(tau) - J0| = {worst:.3} over lags 0..1 ms, fd = {fd:.0} Hz, {subframes} subframes"),
    )
}

// 6, 7, 8

struct Trained {
    root: PathBuf,
    mse: Vec<ChannelMseRow>,
    train_secs: f64,
}

fn reduced_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse("speeds_kmph=100,200,300,400\nsnr_db=-2:1:5\nn_subframes=100\neval_records=holdout\nestimators=ls,ann\n").unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn train_reduced(root: &Path) -> std::result::Result<Trained, String> {
    let cfg = reduced_config(root);
    let paths = RunPaths::new(root);
    generate_dataset(&cfg, &paths).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let (mut ck, _) = train_model(&cfg, &paths, |_, _| {}).map_err(|e| e.to_string())?;
    let train_secs = t.elapsed().as_secs_f64();
    let out = run_eval(&cfg, &paths, Some(&mut ck.model)).map_err(|e| e.to_string())?;
    Ok(Trained { root: root.to_path_buf(), mse: out.channel_mse, train_secs })
}

fn training_efficacy(t: &Trained) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for speed in [100.0, 200.0, 300.0, 400.0] {
        let rows: Vec<_> = t.mse.iter().filter(|r| r.speed_kmph == speed).collect();
        let noisy = rows.iter().map(|r| r.noisy).sum::<f64>() / rows.len() as f64;
        let ann = rows.iter().map(|r| r.ann).sum::<f64>() / rows.len() as f64;
        if speed >= 300.0 {
            ok &= ann < noisy;
        } else if speed == 100.0 {
            ok &= ann <= 1.1 * noisy;
        }
        parts.push(format!("{speed} km/h ann {ann:.4} vs noisy {noisy:.4}"));
    }
    ensure(ok, format!("{}; training {:.0} s", parts.join(", "), t.train_secs))
}

fn eval_rows(t: &Trained) -> std::result::Result<Vec<MetricsRow>, String> {
    let model_path = RunPaths::new(&t.root).model();
    let mut ck = cv2x_chanest::nn::Checkpoint::load(&model_path).map_err(|e| e.to_string())?;
    let root = t.root.join("eval");
    let mut cfg = RunConfig::parse("speeds_kmph=100,400\nsnr_db=4,5\nn_subframes=500\nseed=7001\neval_records=all\n").unwrap();
    cfg.out_dir = root.clone();
    let paths = RunPaths::new(&root);
    generate_dataset(&cfg, &paths).map_err(|e| e.to_string())?;
    Ok(run_eval(&cfg, &paths, Some(&mut ck.model)).map_err(|e| e.to_string())?.rows)
}

fn row<'a>(rows: &'a [MetricsRow], speed: f64, snr: f64, est: Estimator) -> &'a MetricsRow {
    rows.iter()
        .find(|r| r.speed_kmph == speed && r.snr_db == snr && r.estimator == est.name())
        .expect("every point is evaluated")
}

fn bler_ordering(rows: &[MetricsRow]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for speed in [100.0, 400.0] {
        for snr in [4.0, 5.0] {
            let [p, l, a] = [Estimator::Perfect, Estimator::Ls, Estimator::Ann].map(|e| row(rows, speed, snr, e));
            ok &= p.blocks >= 500 && p.bler <= l.bler && p.bler <= a.bler;
            ok &= if speed == 400.0 { a.bler <= l.bler } else { a.bler <= 1.5 * l.bler };
            parts.push(format!("{speed}/{snr}: perfect {:.3} ls {:.3} ann {:.3}", p.bler, l.bler, a.bler));
        }
    }
    ensure(ok, format!("BLER {} ({} blocks each)", parts.join(", "), rows[0].blocks))
}

fn evm_ordering(rows: &[MetricsRow]) -> Check {
    let (l4, a4) = (row(rows, 400.0, 5.0, Estimator::Ls).evm_pct, row(rows, 400.0, 5.0, Estimator::Ann).evm_pct);
    let (l1, a1) = (row(rows, 100.0, 5.0, Estimator::Ls).evm_pct, row(rows, 100.0, 5.0, Estimator::Ann).evm_pct);
    let rel = (a1 - l1).abs() / l1;
    ensure(
        a4 <= l4 && rel <= 0.10,
        format!("400 km/h: ann {a4:.1}% ls {l4:.1}%; 100 km/h: ann {a1:.1}% ls {l1:.1}% ({:.1}% apart)", 100.0 * rel),
    )
}

// 9

fn determinism(tmp: &Path) -> Check {
    let cfg = tmp.join("smoke.cfg");
    fs::write(&cfg, "speeds_kmph=400\nsnr_db=0,5\nn_subframes=6\ntrain_split=0.5\nepochs=2\nbatch_size=4\n")
        .map_err(|e| e.to_string())?;
    let run = |dir: &Path| -> std::result::Result<(), String> {
        for cmd in ["gen", "train", "eval", "report"] {
            let out = Command::new(env!("CARGO_BIN_EXE_cv2x-sim"))
                .args([cmd, "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", dir.to_str().unwrap()])
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
        }
        Ok(())
    };
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    run(&a)?;
    run(&b)?;
    let files = [
        "dataset/speed400_snr0.cvxd",
        "dataset/speed400_snr5.cvxd",
        "model.cvxm",
        "train_loss.csv",
        "metrics.csv",
        "channel_mse.csv",
        "report/speed400_ann.csv",
    ];
    for f in files {
        let (x, y) = (fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?, fs::read(b.join(f)).map_err(|e| e.to_string())?);
        if x != y {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok(format!("{} artifacts byte-identical", files.len()))
}

// 10

fn transport() -> Check {
    let cfg = TransportConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..1000 {
        let payload = random_bits(&mut rng, cfg.tbs);
        let syms = encode_block(&payload, &cfg).map_err(|e| e.to_string())?;
        let d = decode_block(&soft_demap(&syms, 0.1), &cfg).map_err(|e| e.to_string())?;
        if block_error(&payload, &d.payload, d.crc_ok) {
            return Err(format!("noiseless payload {i} not recovered"));
        }
    }
    let blocks = 200;
    let mut blers = Vec::new();
    for snr in -2..=5 {
        let nv = 10f64.powf(-snr as f64 / 10.0);
        let mut errors = 0;
        for _ in 0..blocks {
            let payload = random_bits(&mut rng, cfg.tbs);
            let rx: Vec<Complex64> = encode_block(&payload, &cfg)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|s| s + randn(&mut rng) * nv.sqrt())
                .collect();
            let d = decode_block(&soft_demap(&rx, nv), &cfg).map_err(|e| e.to_string())?;
            errors += block_error(&payload, &d.payload, d.crc_ok) as usize;
        }
        blers.push(errors as f64 / blocks as f64);
    }
    let monotone = blers.windows(2).all(|w| w[1] <= w[0]);
    ensure(monotone, format!("1000 noiseless round trips; AWGN BLER -2..5 dB: {blers:?}"))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| selected.is_empty() || selected.contains(&id);
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match res {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id:>2} {name}: {detail} [{secs:.1} s]");
    };

    report(1, "cazac", &mut cazac);
    report(2, "modem round trip", &mut modem_round_trip);
    report(3, "noiseless static chain", &mut static_chain);
    report(4, "gradient checks", &mut gradients);
    report(5, "doppler statistics", &mut doppler_statistics);

    if (6..=8).any(wanted) {
        let trained = train_reduced(&tmp.path().join("reduced"));
        let rows = match &trained {
            Ok(t) if wanted(7) || wanted(8) => eval_rows(t),
            Ok(_) => Ok(Vec::new()),
            Err(e) => Err(e.clone()),
        };
        report(6, "training efficacy", &mut || trained.as_ref().map_err(Clone::clone).and_then(training_efficacy));
        report(7, "bler ordering", &mut || rows.as_ref().map_err(Clone::clone).and_then(|r| bler_ordering(r)));
        report(8, "evm ordering", &mut || rows.as_ref().map_err(Clone::clone).and_then(|r| evm_ordering(r)));
    }

    report(9, "determinism", &mut || determinism(tmp.path()));
    report(10, "transport chain", &mut transport);

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
