//! Calibration run on the synthetic market: trains every variant and reports
//! out-of-sample RankIC plus the aligned mask probabilities.
//!
//! Defaults are the frozen acceptance configuration.
//!
//! Usage: `cargo run --release -p lgscrl --example pilot -- key=value ...`

use std::collections::HashMap;
use std::time::Instant;

use lgscrl::backtest::rank_ic;
use lgscrl::lgmodel::{LgModelParams, ModelDims, PredictInputs, Variant};
use lgscrl::panel::{generate_synthetic, SynthConfig};
use lgscrl::training::{
    build_samples, init_actor, BaselineKind, ppo_align, split_date, train_critic, validation_rank_ic, DaySample, RewardKind,
    ScrlConfig, SupervisedConfig,
};

fn mean_ic(model: &LgModelParams, days: &[DaySample]) -> f64 {
    let ics: Vec<f64> = days
        .iter()
        .filter_map(|s| {
            let p = model.predict(s.inputs(None)).ok()?;
            rank_ic(p.view(), s.targets.view()).ok()
        })
        .collect();
    ics.iter().sum::<f64>() / ics.len() as f64
}

fn main() -> lgscrl::Result<()> {
    let args: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let get = |k: &str, d: f64| args.get(k).map_or(d, |v| v.parse().expect("number"));
    let seeds: Vec<u64> = args
        .get("seeds")
        .map_or("1,2,3,4,5", String::as_str)
        .split(',')
        .map(|s| s.parse().expect("seed"))
        .collect();
    let d_llm = get("d_llm", 32.0) as usize;
    let epochs = get("epochs", 60.0) as usize;

    for seed in seeds {
        let t0 = Instant::now();
        let mut sc = SynthConfig::new(seed, 100, 30, 10, d_llm, 500, get("noise", 0.02));
        sc.embedding_noise = get("emb_noise", 0.3);
        sc.factor_dispersion = get("dispersion", 3.0);
        let market = generate_synthetic(&sc)?;
        let split = split_date(market.features.calendar().dates(), 0.7)?;
        let train = build_samples(&market.features, &market.returns, Some(&market.embeddings), None, Some(split))?;
        let test: Vec<DaySample> = build_samples(&market.features, &market.returns, Some(&market.embeddings), None, None)?
            .into_iter()
            .filter(|s| s.date > split)
            .collect();
        let truth_ic = {
            let t_off = train.len();
            let ics: Vec<f64> = test
                .iter()
                .enumerate()
                .filter_map(|(k, s)| {
                    let p = ndarray::Array1::from(market.truth.predict(t_off + k, s.features.view()));
                    rank_ic(p.view(), s.targets.view()).ok()
                })
                .collect();
            ics.iter().sum::<f64>() / ics.len() as f64
        };
        let dims = ModelDims {
            m: 30,
            hidden: 36,
            factors: 10,
            d_llm,
        };
        let sup = SupervisedConfig {
            epochs,
            batch_days: get("batch_days", 16.0) as usize,
            learning_rate: get("lr", 1e-2),
            seed,
        };
        let mut ic = HashMap::new();
        let mut models = HashMap::new();
        for v in [Variant::Local, Variant::LgStock, Variant::LgLlm] {
            let init = LgModelParams::init(dims, v, seed)?;
            let (m, rep) = train_critic(&train, init, &sup)?;
            eprintln!("  {v}: loss {:.3e} -> {:.3e}", rep.initial_loss, rep.final_loss());
            ic.insert(v, mean_ic(&m, &test));
            models.insert(v, m);
        }
        let t_sup = t0.elapsed().as_secs_f64();
        let scfg = ScrlConfig {
            theta: get("theta", 1e-9),
            learning_rate: get("ppo_lr", 5e-3),
            reward_scale: get("reward_scale", 1e-4),
            rollouts: get("rollouts", 40.0) as usize,
            batch_size: get("batch", 128.0) as usize,
            ppo_epochs: get("ppo_epochs", 4.0) as usize,
            reward_kind: if get("rank_reward", 0.0) > 0.0 { RewardKind::RankIc } else { RewardKind::NegMse },
            train_heads: get("heads", 1.0) > 0.0,
            head_learning_rate: get("head_lr", 2.5e-4),
            participants: get("participants", 4.0) as usize,
            baseline: if get("global_baseline", 0.0) > 0.0 { BaselineKind::Global } else { BaselineKind::PerDate },
            seed,
            ..ScrlConfig::default()
        };
        if get("landscape", 0.0) > 0.0 {
            let stock = models[&Variant::LgStock].clone();
            let mut scrl = stock.clone();
            scrl.variant = Variant::ScrlLg;
            let eval = |mask: &lgscrl::lgmodel::MaskVector| -> (f64, f64) {
                let mut mse = 0.0;
                let mut ic = 0.0;
                for s in &train {
                    let p = scrl.predict(s.inputs(Some(mask))).unwrap();
                    let r = &p - &s.targets;
                    mse += r.dot(&r) / r.len() as f64 / train.len() as f64;
                    ic += rank_ic(p.view(), s.targets.view()).unwrap_or(0.0) / train.len() as f64;
                }
                (mse, ic)
            };
            let ones = lgscrl::lgmodel::MaskVector::ones(30);
            let base = eval(&ones);
            println!("  ones: mse {:.4e} ic {:.4}", base.0, base.1);
            let sup = lgscrl::lgmodel::MaskVector::new(market.truth.feature_mask(30))?;
            let (m, i) = eval(&sup);
            println!("  support only: dmse {:+.3e} dic {:+.4}", m - base.0, i - base.1);
            for j in 0..30 {
                let mut v = vec![1.0; 30];
                v[j] = 0.0;
                let (m, i) = eval(&lgscrl::lgmodel::MaskVector::new(v)?);
                println!("  drop {j}{}: dmse {:+.3e} dic {:+.4}", if market.truth.support().contains(&j) { "*" } else { " " }, m - base.0, i - base.1);
            }
        }
        let (actor, reference) = init_actor(&models[&Variant::LgStock], d_llm, seed)?;
        let out = ppo_align(actor, &reference, &train, &scfg)?;
        let scrl_ic = validation_rank_ic(&out.actor, &test)?.unwrap_or(f64::NAN);
        let probs = &out.rollouts.last().unwrap().mean_probabilities;
        let support = market.truth.support();
        let (mut s_in, mut s_out) = (0.0, 0.0);
        for (j, p) in probs.iter().enumerate() {
            if support.contains(&j) {
                s_in += p / support.len() as f64;
            } else {
                s_out += p / (probs.len() - support.len()) as f64;
            }
        }
        let full_mask_ic = {
            let ones = lgscrl::lgmodel::MaskVector::ones(30);
            let ics: Vec<f64> = test
                .iter()
                .filter_map(|s| {
                    let p = out.actor.model.predict(PredictInputs::new(s.features.view()).with_mask(&ones)).ok()?;
                    rank_ic(p.view(), s.targets.view()).ok()
                })
                .collect();
            ics.iter().sum::<f64>() / ics.len() as f64
        };
        println!(
            "seed {seed}: truth {truth_ic:.4} local {:.4} stock {:.4} llm {:.4} scrl {scrl_ic:.4} (ones {full_mask_ic:.4}) | support p {s_in:.4} other p {s_out:.4} margin {:.4} | sup {t_sup:.1}s total {:.1}s",
            ic[&Variant::Local],
            ic[&Variant::LgStock],
            ic[&Variant::LgLlm],
            s_in - s_out,
            t0.elapsed().as_secs_f64()
        );
        let pr: Vec<String> = probs.iter().map(|p| format!("{p:.3}")).collect();
        eprintln!("  support {support:?} probs [{}]", pr.join(" "));
    }
    Ok(())
}
