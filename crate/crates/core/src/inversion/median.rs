use crate::grid::RealGrid;

/// 3×3 median per pixel with replicated edges. Neighbours outside `mask`
/// are skipped; an even number of survivors averages the middle pair.
/// Masked pixels keep their input value. 3D grids are filtered slice by
/// slice along the first axis.
pub fn median_filter_3x3(grid: &RealGrid, mask: Option<&[bool]>) -> RealGrid {
    let geom = grid.geom();
    let dims = geom.dims();
    let (ny, nx) = (dims[dims.len() - 2], dims[dims.len() - 1]);
    let slice = ny * nx;
    let data = grid.data();
    let valid = |i: usize| mask.is_none_or(|m| m[i]);
    let mut out = data.to_vec();
    let mut window = Vec::with_capacity(9);
    for base in (0..data.len()).step_by(slice) {
        for y in 0..ny {
            for x in 0..nx {
                let idx = base + y * nx + x;
                if !valid(idx) {
                    continue;
                }
                window.clear();
                for dy in [-1isize, 0, 1] {
                    let yy = (y as isize + dy).clamp(0, ny as isize - 1) as usize;
                    for dx in [-1isize, 0, 1] {
                        let xx = (x as isize + dx).clamp(0, nx as isize - 1) as usize;
                        let j = base + yy * nx + xx;
                        if valid(j) {
                            window.push(data[j]);
                        }
                    }
                }
                window.sort_by(f64::total_cmp);
                let n = window.len();
                out[idx] = if n % 2 == 1 {
                    window[n / 2]
                } else {
                    0.5 * (window[n / 2 - 1] + window[n / 2])
                };
            }
        }
    }
    RealGrid::from_vec(geom.clone(), out).expect("same length")
}
