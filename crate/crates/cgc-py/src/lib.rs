//! Python bindings: build extended frames from potentials and project
//! constant-curvature surfaces out of them.

use cgc::dalembert::{self, ExtendedFrame, GridSpec};
use cgc::geometry;
use cgc::loop_algebra::TruncationPolicy;
use cgc::potentials::{self, PotentialPair};
use cgc::projections::{self, ProjectionParams, SurfaceGrid, Target};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: cgc::Error) -> PyErr {
    match e {
        cgc::Error::Config(_)
        | cgc::Error::Schema { .. }
        | cgc::Error::UnknownBuiltin(_)
        | cgc::Error::DegenerateMu(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A surface sampled over the parameter grid, either in S^3 (unit
/// vectors in R^4) or E^3 (x0 = 0).
#[pyclass]
struct Surface {
    surface: SurfaceGrid,
    rho: f64,
}

#[pymethods]
impl Surface {
    /// Grid shape as (n_u, n_v).
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.surface.grid.n_u, self.surface.grid.n_v)
    }

    /// "s3" or "e3".
    #[getter]
    fn target(&self) -> &'static str {
        match self.surface.target {
            Target::S3 => "s3",
            Target::E3 => "e3",
        }
    }

    /// Positions in R^4, row-major over the grid.
    fn positions(&self) -> Vec<[f64; 4]> {
        self.surface.position.clone()
    }

    /// Unit normals in R^4, row-major over the grid.
    fn normals(&self) -> Vec<[f64; 4]> {
        self.surface.normal.clone()
    }

    fn valid(&self) -> Vec<bool> {
        self.surface.valid.clone()
    }

    /// Median finite-difference Gauss curvature over the regular
    /// interior (margin of 3 grid points).
    fn median_curvature(&self) -> f64 {
        let report = geometry::diagnostics(&self.surface, self.rho);
        let mask = geometry::regular_interior_mask(&report, 3);
        geometry::median(
            report
                .k_est
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v),
        )
    }

    /// Median harmonicity residual of the normal Gauss map over the
    /// regular interior.
    fn median_harmonicity_residual(&self) -> f64 {
        let report = geometry::diagnostics(&self.surface, self.rho);
        let mask = geometry::regular_interior_mask(&report, 3);
        geometry::median(
            report
                .res_harmonic
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v),
        )
    }

    /// Write the mesh as a Wavefront OBJ (stereographic image for S^3).
    fn write_obj(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| err(e.into()))?;
        let mut w = std::io::BufWriter::new(file);
        cgc::export::write_obj(&mut w, &self.surface).map_err(err)
    }
}

/// An extended frame built over a parameter grid; surfaces are
/// projections of it.
#[pyclass]
struct Frame {
    frame: ExtendedFrame,
    pair: PotentialPair,
}

#[pymethods]
impl Frame {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.frame.grid.n_u, self.frame.grid.n_v)
    }

    /// Largest Birkhoff factorization residual over the grid.
    #[getter]
    fn max_residual(&self) -> f64 {
        self.frame.max_residual
    }

    /// Surface of constant curvature 1 - ((mu+1)/(mu-1))^2 in S^3.
    fn project(&self, mu: f64) -> PyResult<Surface> {
        let params = ProjectionParams::new(mu).map_err(err)?;
        let surface = projections::project_mu(&self.frame, &params).map_err(err)?;
        Ok(Surface {
            surface,
            rho: params.rho,
        })
    }

    /// Pseudospherical surface (K = -1) in E^3 from the Sym formula.
    fn sym(&self) -> PyResult<Surface> {
        let surface = projections::sym(&self.frame).map_err(err)?;
        Ok(Surface { surface, rho: 1.0 })
    }

    /// Blown-up projection (2/(1-mu))(f_mu - e0) with curvature -mu.
    fn scaled(&self, mu: f64) -> PyResult<Surface> {
        let surface = projections::scaled_projection(&self.frame, mu).map_err(err)?;
        Ok(Surface {
            surface,
            rho: (mu + 1.0) / (mu - 1.0),
        })
    }

    /// Flat (intrinsically K = 0) limit surface in S^3 over this grid.
    fn flat_limit(&self) -> PyResult<Surface> {
        let surface =
            projections::flat_limit(&self.pair, &self.frame.grid, &self.frame.policy)
                .map_err(err)?;
        Ok(Surface { surface, rho: 1.0 })
    }

    /// Member of the associated family: the frame reindexed by
    /// lambda -> s * lambda.
    fn associated(&self, s: f64) -> PyResult<Frame> {
        let frame = dalembert::associated_frame(&self.frame, s).map_err(err)?;
        Ok(Frame {
            frame,
            pair: self.pair.clone(),
        })
    }
}

/// Build an extended frame. `potential` is a builtin name
/// ("revolution", "amsler") or a JSON config document; `domain` is
/// ((u0, u1), (v0, v1)) and defaults to the potential's own.
#[pyfunction]
#[pyo3(signature = (potential, n_u=101, n_v=101, max_degree=24, domain=None))]
fn build_frame(
    potential: &str,
    n_u: usize,
    n_v: usize,
    max_degree: i32,
    domain: Option<((f64, f64), (f64, f64))>,
) -> PyResult<Frame> {
    let pair = if potential.trim_start().starts_with('{') {
        let parsed = potentials::parse_config(potential).map_err(err)?;
        parsed.pair
    } else {
        potentials::builtin(potential).map_err(err)?
    };
    let (u_range, v_range) = domain.unwrap_or((pair.domain.u, pair.domain.v));
    let grid = GridSpec::new(u_range, v_range, n_u, n_v).map_err(err)?;
    let policy = TruncationPolicy::new(max_degree, 1e-10);
    let frame = dalembert::extended_frame(&pair, &grid, &policy).map_err(err)?;
    Ok(Frame { frame, pair })
}

/// Curvature K = 1 - ((mu+1)/(mu-1))^2 of the mu-projection.
#[pyfunction]
fn curvature_formula(mu: f64) -> f64 {
    projections::curvature_formula(mu)
}

/// Curvature -mu of the scaled projection.
#[pyfunction]
fn scaled_curvature_formula(mu: f64) -> f64 {
    projections::scaled_curvature_formula(mu)
}

#[pymodule]
fn cgc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Frame>()?;
    m.add_class::<Surface>()?;
    m.add_function(wrap_pyfunction!(build_frame, m)?)?;
    m.add_function(wrap_pyfunction!(curvature_formula, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_curvature_formula, m)?)?;
    Ok(())
}
