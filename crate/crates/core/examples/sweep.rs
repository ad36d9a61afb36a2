//! Temporary hyperparameter sweep harness (not part of the deliverable).
use wavenet_ndt::config::{default_grid, default_plate};
use wavenet_ndt::dataset::*;
use wavenet_ndt::defects::DefectClass;
use wavenet_ndt::eval::evaluate;
use wavenet_ndt::nn::*;
use std::time::Instant;

fn run(tag: &str, ds: &DefectDataset, tc: &TrainConfig) {
    let t0 = Instant::now();
    let specs = CnnModel::default_architecture(100, tc.dropout_rate);
    let mut model = CnnModel::from_specs(&specs, 100, tc.seed).unwrap();
    let hist = train(&mut model, &ds.split_pairs(Split::Train), &ds.split_pairs(Split::Val), tc).unwrap();
    let report = evaluate(Some(&model), ds, Split::Test).unwrap();
    let pc = |c: DefectClass| report
        .class_summary(c)
        .and_then(|s| s.convnet_mean_db)
        .unwrap_or(f64::NAN);
    println!(
        "[{tag}] epochs={} best={} tmse={:.3e} vmse={:.3e} time={:.0}s | overall conv={:.2} wnst={:.2} | tri={:.2} rect={:.2} step={:.2}",
        hist.epochs.len(),
        hist.best_epoch,
        hist.epochs[hist.best_epoch].train_mse,
        hist.best_val_mse().unwrap(),
        t0.elapsed().as_secs_f64(),
        report.overall.convnet_mean_db.unwrap(),
        report.overall.wnst_mean_db,
        pc(DefectClass::Triangle),
        pc(DefectClass::Rect),
        pc(DefectClass::Step),
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    let t0 = Instant::now();
    let ds = build_mixed_dataset(1200, 42, default_plate(), default_grid()).unwrap();
    println!("dataset built in {:.1}s", t0.elapsed().as_secs_f64());
    let base = TrainConfig::default();

    match which {
        "a" => run("A spec-default", &ds, &base),
        "b" => run("B l2=1e-5 p=40", &ds, &TrainConfig { l2_lambda: 1e-5, patience: 40, ..base }),
        "c" => run("C l2=1e-5 drop=0.1 p=40", &ds, &TrainConfig { l2_lambda: 1e-5, dropout_rate: 0.1, patience: 40, ..base }),
        "d" => run("D l2=1e-6 drop=0.2 p=40", &ds, &TrainConfig { l2_lambda: 1e-6, dropout_rate: 0.2, patience: 40, ..base }),
        "e" => run("E l2=1e-6 drop=0.1 p=60", &ds, &TrainConfig { l2_lambda: 1e-6, dropout_rate: 0.1, patience: 60, ..base }),
        "f" => run("F spec-reg decay p30 max800", &ds, &TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.3, patience: 30, max_epochs: 800, ..base }),
        "g" => run("G l2=1e-5 d0.2 decay p30 max800", &ds, &TrainConfig { l2_lambda: 1e-5, dropout_rate: 0.2, patience: 30, max_epochs: 800, ..base }),
        "noisy" => {
            // variants probed below
            let nds = build_noisy_rect_dataset(400, NoiseConfig::default(), 43, default_plate(), default_grid()).unwrap();
            let tc = args.get(2).map(|s| s.as_str()).unwrap_or("b");
            let cfg = match tc {
                "na" => TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.3, patience: 60, ..base },
                "nb" => TrainConfig { l2_lambda: 1e-5, dropout_rate: 0.3, patience: 60, ..base },
                "nc" => TrainConfig { l2_lambda: 1e-5, dropout_rate: 0.2, patience: 60, ..base },
                "nd" => TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.3, patience: 100, max_epochs: 1000, ..base },
                "ne" => TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.4, batch_size: 16, patience: 100, max_epochs: 1000, ..base },
                "nf" => TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.3, patience: 30, max_epochs: 800, ..base },
                "ng" => TrainConfig { l2_lambda: 1e-5, dropout_rate: 0.2, patience: 30, max_epochs: 800, ..base },
                _ => base,
            };
            if tc == "n2" {
                // Two-stage: plateau then resume at a lower learning rate.
                let stage1 = TrainConfig { l2_lambda: 1e-4, dropout_rate: 0.3, patience: 60, ..base };
                let t0 = Instant::now();
                let specs = CnnModel::default_architecture(100, stage1.dropout_rate);
                let mut model = CnnModel::from_specs(&specs, 100, stage1.seed).unwrap();
                let h1 = train(&mut model, &nds.split_pairs(Split::Train), &nds.split_pairs(Split::Val), &stage1).unwrap();
                println!("stage1: epochs={} vmse={:.3e}", h1.epochs.len(), h1.best_val_mse().unwrap());
                let stage2 = TrainConfig { learning_rate: 1e-4, max_epochs: 400, patience: 60, ..stage1 };
                let h2 = train(&mut model, &nds.split_pairs(Split::Train), &nds.split_pairs(Split::Val), &stage2).unwrap();
                println!("stage2: epochs={} vmse={:.3e}", h2.epochs.len(), h2.best_val_mse().unwrap());
                let stage3 = TrainConfig { learning_rate: 1e-5, max_epochs: 200, patience: 60, ..stage1 };
                let h3 = train(&mut model, &nds.split_pairs(Split::Train), &nds.split_pairs(Split::Val), &stage3).unwrap();
                println!("stage3: epochs={} vmse={:.3e} time={:.0}s", h3.epochs.len(), h3.best_val_mse().unwrap(), t0.elapsed().as_secs_f64());
                let report = evaluate(Some(&model), &nds, Split::Test).unwrap();
                println!("[noisy-n2] conv={:.2} wnst={:.2}", report.overall.convnet_mean_db.unwrap(), report.overall.wnst_mean_db);
            } else {
                run(&format!("noisy-{tc}"), &nds, &cfg);
            }
        }
        _ => {
            run("A spec-default", &ds, &base);
            run("B l2=1e-5 p=40", &ds, &TrainConfig { l2_lambda: 1e-5, patience: 40, ..base });
        }
    }
}

#[allow(dead_code)]
fn variant_e() {}
