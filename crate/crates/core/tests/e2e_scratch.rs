//! Scratch calibration for the end-to-end synthetic run (to be folded into
//! the acceptance suite).

use std::time::Instant;

use veriface_core::authentication::enroll;
use veriface_core::evaluation::default_threshold_grid;
use veriface_core::metric_learning::{train, EncoderParams, TrainConfig};
use veriface_core::pipeline::{
    build_clip_index, compute_split, embed_entries, enrollment_clips, evaluate_protocol,
    SplitProtocol,
};
use veriface_core::synthetic::generate_world;
use veriface_core::WorldConfig;

#[test]
#[ignore]
fn calibrate_end_to_end() {
    let iterations: usize =
        std::env::var("CAL_ITERS").ok().and_then(|v| v.parse().ok()).unwrap_or(200);
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let cfg = WorldConfig::default();
    let manifest = generate_world(&cfg, dir.path()).unwrap();
    println!("world generated in {:.1?} ({} records)", t0.elapsed(), manifest.records.len());

    let split = compute_split(&manifest, SplitProtocol::Identity { ratio: 0.8 }, 42, 100).unwrap();
    println!("split: {} reference, {} test entries", split.reference.len(), split.test.len());

    let t1 = Instant::now();
    let index = build_clip_index(&split.reference, 100).unwrap();
    println!("clip index built in {:.1?} ({} identities)", t1.elapsed(), index.identities.len());

    let initial = EncoderParams::desk_default(cfg.behavior_dim, 32, 42);
    let train_cfg = TrainConfig { iterations, t: 100, seed: 42, ..TrainConfig::default() };
    let t2 = Instant::now();
    let (params, log) = train(&index, initial, &train_cfg).unwrap();
    println!(
        "trained {} iterations in {:.1?} ({:.2?}/iter): loss first20={:.4} last20={:.4}",
        iterations,
        t2.elapsed(),
        t2.elapsed() / iterations.max(1) as u32,
        log.mean_of_first(20),
        log.mean_of_last(20),
    );

    let t3 = Instant::now();
    let reference = embed_entries(&split.reference, &params, 100, 5).unwrap();
    let test = embed_entries(&split.test, &params, 100, 5).unwrap();
    println!(
        "embedded {} reference + {} test clips in {:.1?}",
        reference.len(),
        test.len(),
        t3.elapsed()
    );

    let refs = enroll(&enrollment_clips(&reference)).unwrap();
    let t4 = Instant::now();
    let grid = default_threshold_grid();
    let report = evaluate_protocol(&test, &refs, &grid, 0.86).unwrap();
    println!("evaluated in {:.1?}", t4.elapsed());

    println!("auc = {:.4}", report.auc);
    println!(
        "accuracy at tau_f=0.86: real={:.4} fake={:.4}",
        report.clip_accuracy.real, report.clip_accuracy.fake
    );
    if let Some((tau, acc)) = report.crossover {
        println!("crossover: tau={tau:.4} acc={acc:.4}");
        let at_cross = veriface_core::evaluation::accuracy_at(&report.records, tau).unwrap();
        println!("accuracy at crossover: real={:.4} fake={:.4}", at_cross.real, at_cross.fake);
    } else {
        println!("no crossover");
    }
    if let Some(ctx) = &report.context_histograms {
        println!(
            "behavior sims: same/same={:.4} same/diff={:.4} diff/same={:.4}",
            ctx.same_person_same_context.mean(),
            ctx.same_person_diff_context.mean(),
            ctx.diff_people_same_context.mean()
        );
    }
    if let (Some(s), Some(t)) = (&report.vs_source, &report.vs_target) {
        println!("appearance sims: vs_source={:.4} vs_target={:.4}", s.mean(), t.mean());
    }
    println!("total {:.1?}", t0.elapsed());
}

#[test]
#[ignore]
fn phase_timing() {
    use rand::{Rng, SeedableRng};
    use veriface_core::feature_store::{ClipFeatureMatrix, ClipOrigin};
    use veriface_core::metric_learning::{
        mine_pairs, ms_loss, ms_loss_grad, pairwise_similarity, MsLossConfig,
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let params = EncoderParams::desk_default(24, 32, 7);
    let clip = ClipFeatureMatrix {
        dim: 24,
        t: 100,
        data: (0..2400).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        origin: ClipOrigin { video_id: "x".into(), start_frame: 0 },
    };

    let n = 512;
    let t0 = Instant::now();
    let mut tapes = Vec::new();
    for _ in 0..n {
        tapes.push(params.forward(&clip).unwrap());
    }
    println!("forward: {:?}/clip", t0.elapsed() / n as u32);

    let g: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let t1 = Instant::now();
    for (_, tape) in &tapes {
        let _ = params.backward(tape, &g).unwrap();
    }
    println!("backward: {:?}/clip", t1.elapsed() / n as u32);

    // 256-batch similarity + mining + loss + grad
    let embeddings: Vec<Vec<f64>> = (0..256)
        .map(|_| {
            let v: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = v.iter().sum::<f64>() / 32.0;
            let c: Vec<f64> = v.iter().map(|x| x - m).collect();
            let nn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.into_iter().map(|x| x / nn).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..256).map(|i| i / 8).collect();
    let t2 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let sim = pairwise_similarity(&embeddings, &labels).unwrap();
        let mining = mine_pairs(&sim, 0.1);
        let _ = ms_loss(&sim, &mining, &MsLossConfig::default());
        let _ = ms_loss_grad(&sim, &mining, &MsLossConfig::default());
    }
    println!("sim+mine+loss+grad: {:?}/batch", t2.elapsed() / reps);
}
