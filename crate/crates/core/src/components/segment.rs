use std::collections::VecDeque;

use crate::model::Raster;

/// Per-pixel color key after quantizing each channel to `levels` bins.
pub fn quantize(image: &Raster, levels: u32) -> Vec<u32> {
    let c = image.channels();
    image
        .data()
        .chunks_exact(c)
        .map(|px| {
            px.iter()
                .fold(0u32, |key, &v| key * levels + (v as u32 * levels) / 256)
        })
        .collect()
}

/// 4-connected components of equal keys.
///
/// Components are returned in order of their first pixel in a row-major
/// scan; each lists its pixel indices in BFS order. Pixels whose key equals
/// `skip` belong to no component.
pub fn connected_components(
    height: usize,
    width: usize,
    keys: &[u32],
    skip: Option<u32>,
) -> Vec<Vec<usize>> {
    let mut seen = vec![false; height * width];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..height * width {
        if seen[start] || Some(keys[start]) == skip {
            continue;
        }
        let key = keys[start];
        let mut comp = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if !seen[q] && keys[q] == key {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        out.push(comp);
    }
    out
}

/// Pixels 4-connected to `start` through equal keys, `start` included.
pub fn flood_fill(height: usize, width: usize, keys: &[u32], start: usize) -> Vec<usize> {
    let key = keys[start];
    let mut seen = vec![false; height * width];
    let mut out = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(p) = queue.pop_front() {
        out.push(p);
        let (x, y) = (p % width, p / width);
        let neighbours = [
            (x > 0).then(|| p - 1),
            (x + 1 < width).then(|| p + 1),
            (y > 0).then(|| p - width),
            (y + 1 < height).then(|| p + width),
        ];
        for q in neighbours.into_iter().flatten() {
            if !seen[q] && keys[q] == key {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    out
}
