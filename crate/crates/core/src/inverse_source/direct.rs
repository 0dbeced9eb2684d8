use crate::error::Result;
use crate::forward::SourceSpec;
use crate::geometry::field::SpaceTimeField;
use crate::grid::{diff1, dot, GridFunction};

/// Reads `f` off the initial slice of a full solution:
/// `f = (A0 d_t u + A . grad u + p u) / R` at `t = 0`, with a one-sided
/// second-order time difference.
pub fn reconstruct_direct(field: &SpaceTimeField, src: &SourceSpec, u: &GridFunction) -> Result<Vec<f64>> {
    let grid = &u.grid;
    src.check_m0(&grid.space)?;
    let ns = grid.space.len();
    let dt = grid.dt();
    let grad = grid.space.gradient(u.slice(0));
    Ok(grid
        .space
        .nodes()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let ut = diff1(|k| u.values[k * ns + i], 0, grid.nt, dt);
            let lhs = field.a0(x, 0.0) * ut + dot(field.a(x, 0.0), grad[i]) + (src.p)(x, 0.0) * u.values[i];
            lhs / (src.r)(x, 0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::LabError;
    use crate::forward::Profile;
    use crate::grid::{SpaceTimeGrid, SpatialDomain};

    #[test]
    fn zero_solution_gives_zero_source() {
        let g = SpaceTimeGrid::new(SpatialDomain::interval(0.0, 1.0, 11).unwrap(), 11, 1.0).unwrap();
        let f = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        let src = SourceSpec::pure_source(Profile::zero());
        let fh = reconstruct_direct(&f, &src, &GridFunction::zeros(&g)).unwrap();
        assert!(fh.iter().all(|v| *v == 0.0));

        let bad = SourceSpec::new(|_, _| 0.0, |x, _| x[0], Profile::zero(), 0.1);
        assert!(matches!(
            reconstruct_direct(&f, &bad, &GridFunction::zeros(&g)),
            Err(LabError::ViolatesR0 { .. })
        ));
    }
}
