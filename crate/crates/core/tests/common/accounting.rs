//! Reference figures for the 20-layer CIFAR ResNet and checks against them.

use ensemble_prune::metrics::{count_flops, diff_metrics, format_mega_truncated, preset, preset_with_position};
use ensemble_prune::nn::MaskPosition;

pub struct Column {
    pub name: &'static str,
    pub position: MaskPosition,
    pub removed: [usize; 19],
    pub layer_pct: [f64; 19],
    pub params_pct: f64,
    pub flops_pct: f64,
}

pub const COLUMNS: [Column; 4] = [
    Column {
        name: "before/forward",
        position: MaskPosition::BeforeShortcut,
        removed: [1, 6, 4, 7, 6, 0, 0, 5, 1, 14, 20, 0, 2, 0, 4, 34, 30, 0, 24],
        layer_pct: [
            6.25, 41.41, 53.12, 43.75, 64.84, 0.0, 0.0, 15.62, 18.26, 43.75, 78.91, 0.0, 6.25, 0.0, 6.25, 53.12,
            75.10, 0.0, 37.50,
        ],
        params_pct: 30.70,
        flops_pct: 30.91,
    },
    Column {
        name: "before/backward",
        position: MaskPosition::BeforeShortcut,
        removed: [0, 1, 0, 1, 0, 0, 0, 0, 0, 7, 9, 1, 6, 16, 6, 16, 23, 21, 23],
        layer_pct: [
            0.0, 6.25, 6.25, 6.25, 6.25, 0.0, 0.0, 0.0, 0.0, 21.88, 43.85, 3.12, 21.29, 25.00, 32.03, 25.00, 51.95,
            32.81, 56.96,
        ],
        params_pct: 32.33,
        flops_pct: 18.99,
    },
    Column {
        name: "after/forward",
        position: MaskPosition::AfterShortcut,
        removed: [2, 6, 3, 6, 1, 1, 0, 6, 4, 6, 0, 20, 0, 9, 7, 26, 5, 0, 21],
        layer_pct: [
            12.50, 45.31, 49.22, 49.22, 41.41, 12.11, 6.25, 18.75, 28.91, 28.91, 18.75, 62.50, 62.50, 14.06, 23.46,
            47.12, 45.26, 7.81, 32.81,
        ],
        params_pct: 31.55,
        flops_pct: 33.76,
    },
    Column {
        name: "after/backward",
        position: MaskPosition::AfterShortcut,
        removed: [0, 9, 0, 8, 0, 0, 0, 2, 0, 13, 0, 0, 0, 19, 0, 18, 1, 16, 27],
        layer_pct: [
            0.0, 56.25, 56.25, 50.00, 50.00, 0.0, 0.0, 6.25, 6.25, 40.62, 40.62, 0.0, 0.0, 29.69, 29.69, 28.12,
            29.25, 26.17, 56.64,
        ],
        params_pct: 30.41,
        flops_pct: 28.38,
    },
];

/// Printed cells carry two decimals, some truncated and some rounded.
pub const CELL_TOL: f64 = 0.011;

/// Unpruned layout: filters, input channels, output side, FLOP cell.
pub const LAYOUT: [(usize, usize, usize, &str); 19] = [
    (16, 3, 32, "0.44M"),
    (16, 16, 32, "2.35M"),
    (16, 16, 32, "2.35M"),
    (16, 16, 32, "2.35M"),
    (16, 16, 32, "2.35M"),
    (16, 16, 32, "2.35M"),
    (16, 16, 32, "2.35M"),
    (32, 16, 16, "1.17M"),
    (32, 32, 16, "2.35M"),
    (32, 32, 16, "2.35M"),
    (32, 32, 16, "2.35M"),
    (32, 32, 16, "2.35M"),
    (32, 32, 16, "2.35M"),
    (64, 32, 8, "1.17M"),
    (64, 64, 8, "2.35M"),
    (64, 64, 8, "2.35M"),
    (64, 64, 8, "2.35M"),
    (64, 64, 8, "2.35M"),
    (64, 64, 8, "2.35M"),
];

pub fn check_layout() -> Result<(), String> {
    let desc = preset("resnet20-cifar").map_err(|e| e.to_string())?;
    let filters: usize = desc.conv_filters().iter().sum();
    if filters != 688 {
        return Err(format!("{filters} filters, expected 688"));
    }
    let flops = count_flops(&desc).map_err(|e| e.to_string())?;
    for (i, &(n, c, hw, cell)) in LAYOUT.iter().enumerate() {
        let l = &desc.layers[i];
        if (l.n_filters, l.in_channels) != (n, c) {
            return Err(format!("layer {i}: shape {}x{}", l.n_filters, l.in_channels));
        }
        let hand = (n * c * 9 * hw * hw) as u64;
        if flops.per_layer[i] != hand {
            return Err(format!("layer {i}: {} FLOPs, hand count {hand}", flops.per_layer[i]));
        }
        let shown = format_mega_truncated(hand, 2);
        if shown != cell {
            return Err(format!("layer {i}: cell {shown}, expected {cell}"));
        }
    }
    let conv_total: u64 = flops.per_layer[..19].iter().sum();
    let shown = format_mega_truncated(conv_total, 1);
    if shown != "40.5M" {
        return Err(format!("total {shown}"));
    }
    Ok(())
}

/// Compares every per-layer and total cell of one column.
pub fn check_column(col: &Column) -> Result<(), String> {
    let before = preset_with_position("resnet20-cifar", col.position).map_err(|e| e.to_string())?;
    let after = before.apply_removals(&col.removed).map_err(|e| e.to_string())?;
    let diff = diff_metrics(&before, &after).map_err(|e| e.to_string())?;
    for (i, &want) in col.layer_pct.iter().enumerate() {
        let got = diff.rows[i].params_removed_pct;
        if (got - want).abs() > CELL_TOL {
            return Err(format!("{} layer {i}: {got:.3}% vs {want}%", col.name));
        }
    }
    for (what, got, want) in [
        ("params", diff.params_removed_pct, col.params_pct),
        ("flops", diff.flops_removed_pct, col.flops_pct),
    ] {
        if (got - want).abs() > CELL_TOL {
            return Err(format!("{} total {what}: {got:.3}% vs {want}%", col.name));
        }
    }
    Ok(())
}

/// Per-filter cost of the 16-filter layers on 32x32 maps and of the 64-filter
/// layers on 8x8 maps.
pub fn check_single_filter() -> Result<(), String> {
    let desc = preset("resnet20-cifar").map_err(|e| e.to_string())?;
    for (layer, params, flops) in [(1, 144, 147456), (18, 576, 36864)] {
        let l = &desc.layers[layer];
        let got = (l.params_per_filter(), l.flops_per_filter().map_err(|e| e.to_string())?);
        if got != (params, flops) {
            return Err(format!("layer {layer}: {got:?}, expected ({params}, {flops})"));
        }
    }
    Ok(())
}
