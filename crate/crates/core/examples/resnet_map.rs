//! Trains the residual network on parameter/coefficient pairs for a few seconds.

use epod::coeff::CoeffFamily;
use epod::fem::{MaskNorms, DEFAULT_TOL};
use epod::maps::TrainingTable;
use epod::mesh::{Mesh, Rect};
use epod::pod::{PodBasis, PodOptions, Truncation};
use epod::resnet::{output_scaling, train_net, ResNet, TrainConfig};
use epod::snapshots::SnapshotSet;

fn main() -> epod::Result<()> {
    let n = 16;
    let family = CoeffFamily::parse("ex2", n)?;
    let mesh = Mesh::new(n)?;
    let set = SnapshotSet::generate(&family, family.default_force(), n, 1100, 1, DEFAULT_TOL)?
        .restrict(&mesh, Rect::d1())?;
    let (train, held) = (set.slice(0..1000)?, set.slice(1000..1100)?);
    let norms = MaskNorms::new(&mesh, &set.mask(&mesh)?)?;
    let opts = PodOptions {
        truncation: Truncation::Fixed(8),
        subtract_mean: false,
    };
    let basis = PodBasis::build(&train.slice(0..100)?, norms.mass(), opts)?;
    let table = TrainingTable::build(&train, &basis, norms.mass())?;
    let held_table = TrainingTable::build(&held, &basis, norms.mass())?;

    let mut net = ResNet::standard(&table.ranges, basis.k(), 1)?;
    let (mean, scale) = output_scaling(&table);
    net.set_output_scaling(mean, scale)?;
    println!(
        "{} parameters, {} training pairs",
        net.param_count(),
        table.len()
    );
    let held_error = |net: &ResNet| -> f64 {
        let pred = net.forward_batch(&held_table.inputs).unwrap();
        let total: f64 = (0..held.len())
            .map(|j| {
                let c: Vec<f64> = pred.row(j).iter().copied().collect();
                norms
                    .relative_errors(&held.column(j), &basis.reconstruct(&c).unwrap())
                    .0
            })
            .sum();
        total / held.len() as f64
    };
    let cfg = TrainConfig {
        epochs: 300,
        seed: 1,
        max_seconds: Some(20.0),
        ..TrainConfig::default()
    };
    let history = train_net(&mut net, &table, &cfg, |epoch, net| {
        if epoch % 50 == 0 {
            println!(
                "epoch {epoch:>4} held-out relative L2 {:.3e}",
                held_error(net)
            );
        }
    })?;
    println!(
        "final training loss {:.4e} after {} epochs",
        history.last().unwrap(),
        history.len()
    );
    println!("held-out relative L2 {:.3e}", held_error(&net));
    Ok(())
}
