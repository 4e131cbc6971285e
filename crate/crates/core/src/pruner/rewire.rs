//! Structural filter removal with downstream rewiring.

use crate::error::{Error, Result};
use crate::nn::{remove_groups, Layer, MaskPosition, Network, Site};

fn validate_selection(indices: &[usize], width: usize) -> Result<Vec<usize>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(Error::InvalidSelection("duplicate filter index".into()));
    }
    if let Some(&bad) = sorted.last().filter(|&&i| i >= width) {
        return Err(Error::InvalidSelection(format!("filter {bad} out of range for width {width}")));
    }
    if sorted.len() >= width {
        return Err(Error::InvalidSelection(format!(
            "cannot remove {} of {width} filters; at least one must remain",
            sorted.len()
        )));
    }
    Ok(sorted)
}

/// Removes the matching input channels from the first structural consumer
/// after layer `after`, adjusting any per-channel layers on the way.
/// `shapes` are the layer shapes from before the removal.
fn remove_consumer_inputs(net: &mut Network, shapes: &[Vec<usize>], after: usize, sorted: &[usize]) -> Result<()> {
    let mut group = 1usize;
    let expand = |group: usize| -> Vec<usize> {
        sorted.iter().flat_map(|&c| c * group..(c + 1) * group).collect()
    };
    for i in after + 1..net.layers.len() {
        let layer = &mut net.layers[i];
        match layer {
            Layer::Relu | Layer::GlobalAvgPool => {}
            Layer::Flatten => group = shapes[i][1..].iter().product(),
            Layer::BatchNorm(bn) => bn.remove_channels(&expand(group)),
            Layer::Mask(m) => m.remove(&expand(group)),
            Layer::Dense(d) => {
                d.remove_inputs(&expand(group));
                return Ok(());
            }
            Layer::Conv2d(c) => {
                c.remove_input_channels(sorted);
                return Ok(());
            }
            Layer::Residual(r) => {
                r.conv1.remove_input_channels(sorted);
                remove_groups(&mut r.skip_map, sorted, 1);
                return Ok(());
            }
        }
    }
    Err(Error::InvalidConfig(format!("no consumer after layer {after}")))
}

pub(crate) fn remove_in_place(net: &mut Network, layer: usize, indices: &[usize]) -> Result<()> {
    let site = net.site(layer)?;
    let width = net.layer_width(layer)?;
    let sorted = validate_selection(indices, width)?;
    if sorted.is_empty() {
        return Ok(());
    }
    let shapes = net.layer_shapes()?;
    match site {
        Site::Top { producer, mask } => {
            for l in &mut net.layers[producer..=mask] {
                match l {
                    Layer::Dense(d) => d.remove_outputs(&sorted),
                    Layer::Conv2d(c) => c.remove_filters(&sorted),
                    Layer::BatchNorm(bn) => bn.remove_channels(&sorted),
                    Layer::Mask(m) => m.remove(&sorted),
                    _ => {}
                }
            }
            remove_consumer_inputs(net, &shapes, mask, &sorted)?;
        }
        Site::BlockFirst(b) => {
            let Layer::Residual(r) = &mut net.layers[b] else { unreachable!() };
            r.conv1.remove_filters(&sorted);
            r.bn1.remove_channels(&sorted);
            r.mask1.remove(&sorted);
            r.conv2.remove_input_channels(&sorted);
        }
        Site::BlockSecond(b) => {
            let Layer::Residual(r) = &mut net.layers[b] else { unreachable!() };
            match r.position {
                MaskPosition::BeforeShortcut => {
                    // Pruned branch maps contribute nothing; the shortcut
                    // keeps every channel.
                    r.conv2.remove_filters(&sorted);
                    r.bn2.remove_channels(&sorted);
                    r.mask2.remove(&sorted);
                    remove_groups(&mut r.branch_map, &sorted, 1);
                }
                MaskPosition::AfterShortcut => {
                    let gone = |o: usize| sorted.binary_search(&o).is_ok();
                    let shift = |o: usize| o - sorted.partition_point(|&s| s < o);
                    let filters: Vec<usize> = r
                        .branch_map
                        .iter()
                        .enumerate()
                        .filter(|&(_, &o)| gone(o))
                        .map(|(f, _)| f)
                        .collect();
                    r.conv2.remove_filters(&filters);
                    r.bn2.remove_channels(&filters);
                    remove_groups(&mut r.branch_map, &filters, 1);
                    for o in &mut r.branch_map {
                        *o = shift(*o);
                    }
                    for s in &mut r.skip_map {
                        *s = s.filter(|&o| !gone(o)).map(shift);
                    }
                    r.mask2.remove(&sorted);
                    r.out_channels -= sorted.len();
                    remove_consumer_inputs(net, &shapes, b, &sorted)?;
                }
            }
        }
    }
    debug_assert!(net.layer_shapes().is_ok());
    Ok(())
}

/// Copy of `net` with the listed filters of prunable layer `layer` removed
/// and every consumer rewired. The result computes exactly what `net`
/// computes with those filters masked off.
pub fn remove_filters(net: &Network, layer: usize, indices: &[usize]) -> Result<Network> {
    let mut out = net.clone();
    remove_in_place(&mut out, layer, indices)?;
    Ok(out)
}
