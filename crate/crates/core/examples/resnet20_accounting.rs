//! Parameter and FLOP accounting for the 20-layer CIFAR ResNet, before and
//! after a set of per-layer filter removals under both gate positions.

use ensemble_prune::metrics::{diff_metrics, preset_with_position, render_diff, render_table};
use ensemble_prune::nn::MaskPosition;

fn main() -> ensemble_prune::Result<()> {
    let base = preset_with_position("resnet20-cifar", MaskPosition::BeforeShortcut)?;
    println!("{}", render_table(&base)?);
    let runs = [
        (MaskPosition::BeforeShortcut, [1, 6, 4, 7, 6, 0, 0, 5, 1, 14, 20, 0, 2, 0, 4, 34, 30, 0, 24]),
        (MaskPosition::AfterShortcut, [2, 6, 3, 6, 1, 1, 0, 6, 4, 6, 0, 20, 0, 9, 7, 26, 5, 0, 21]),
    ];
    for (position, removals) in runs {
        let before = preset_with_position("resnet20-cifar", position)?;
        let diff = diff_metrics(&before, &before.apply_removals(&removals)?)?;
        println!("gates {position:?}:");
        print!("{}", render_diff(&diff));
    }
    Ok(())
}
