//! Mesh and diagnostics writers (OBJ, PLY, CSV) and the JSON frame cache
//! used to hand a built extended frame from `build` to `project`.

use crate::dalembert::{ExtendedFrame, GridSpec};
use crate::error::{Error, Result};
use crate::loop_algebra::{LoopMatrix, TruncationPolicy};
use crate::mat2::{Mat2, C};
use crate::projections::{stereographic, SurfaceGrid, Target};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// R^3 vertex used for export: stereographic image for S3 targets, the
/// (x1, x2, x3) coordinates for E3 targets. Returns None at the south
/// pole (vertex retained as origin, cell masked).
fn export_vertex(s: &SurfaceGrid, idx: usize) -> Option<[f64; 3]> {
    let p = &s.position[idx];
    match s.target {
        Target::S3 => stereographic(p).ok(),
        Target::E3 => Some([p[1], p[2], p[3]]),
    }
}

/// OBJ mesh: `v x y z` in row-major grid order, quad faces over cells
/// whose four corners are valid. Invalid vertices are retained so face
/// indices stay grid-aligned.
pub fn write_obj<W: Write>(w: &mut W, s: &SurfaceGrid) -> Result<()> {
    let g = s.grid;
    let mut exportable = vec![true; g.len()];
    for idx in 0..g.len() {
        match export_vertex(s, idx) {
            Some(p) => writeln!(w, "v {} {} {}", p[0], p[1], p[2])?,
            None => {
                exportable[idx] = false;
                writeln!(w, "v 0 0 0")?;
            }
        }
    }
    for i in 0..g.n_u - 1 {
        for j in 0..g.n_v - 1 {
            let corners = [
                g.idx(i, j),
                g.idx(i + 1, j),
                g.idx(i + 1, j + 1),
                g.idx(i, j + 1),
            ];
            if corners.iter().all(|&c| s.valid[c] && exportable[c]) {
                writeln!(
                    w,
                    "f {} {} {} {}",
                    corners[0] + 1,
                    corners[1] + 1,
                    corners[2] + 1,
                    corners[3] + 1
                )?;
            }
        }
    }
    Ok(())
}

/// ASCII PLY with the same vertex order and face masking as `write_obj`.
pub fn write_ply<W: Write>(w: &mut W, s: &SurfaceGrid) -> Result<()> {
    let g = s.grid;
    let mut exportable = vec![true; g.len()];
    let mut verts = Vec::with_capacity(g.len());
    for idx in 0..g.len() {
        match export_vertex(s, idx) {
            Some(p) => verts.push(p),
            None => {
                exportable[idx] = false;
                verts.push([0.0; 3]);
            }
        }
    }
    let mut faces = Vec::new();
    for i in 0..g.n_u - 1 {
        for j in 0..g.n_v - 1 {
            let corners = [
                g.idx(i, j),
                g.idx(i + 1, j),
                g.idx(i + 1, j + 1),
                g.idx(i, j + 1),
            ];
            if corners.iter().all(|&c| s.valid[c] && exportable[c]) {
                faces.push(corners);
            }
        }
    }
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", verts.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "element face {}", faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for p in &verts {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    for f in &faces {
        writeln!(w, "4 {} {} {} {}", f[0], f[1], f[2], f[3])?;
    }
    Ok(())
}

/// Raw R^4 positions as CSV, one row per grid point.
pub fn write_r4_csv<W: Write>(w: &mut W, s: &SurfaceGrid) -> Result<()> {
    writeln!(w, "i,j,u,v,x0,x1,x2,x3,valid")?;
    let g = s.grid;
    for i in 0..g.n_u {
        for j in 0..g.n_v {
            let idx = g.idx(i, j);
            let p = &s.position[idx];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                i,
                j,
                g.u(i),
                g.v(j),
                p[0],
                p[1],
                p[2],
                p[3],
                s.valid[idx] as u8
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CachedLoop {
    low: i32,
    /// Row-major matrices as [re00, im00, re01, im01, re10, im10, re11, im11].
    coeffs: Vec<[f64; 8]>,
}

fn pack_loop(v: &LoopMatrix) -> CachedLoop {
    let coeffs = v
        .coefficients()
        .iter()
        .map(|m| {
            [
                m[(0, 0)].re,
                m[(0, 0)].im,
                m[(0, 1)].re,
                m[(0, 1)].im,
                m[(1, 0)].re,
                m[(1, 0)].im,
                m[(1, 1)].re,
                m[(1, 1)].im,
            ]
        })
        .collect();
    CachedLoop {
        low: v.low_degree(),
        coeffs,
    }
}

fn unpack_loop(c: &CachedLoop) -> LoopMatrix {
    let coeffs: Vec<Mat2> = c
        .coeffs
        .iter()
        .map(|a| {
            Mat2::new(
                C::new(a[0], a[1]),
                C::new(a[2], a[3]),
                C::new(a[4], a[5]),
                C::new(a[6], a[7]),
            )
        })
        .collect();
    LoopMatrix::from_parts(c.low, coeffs)
}

/// Serialized extended frame plus the settings that produced it. The
/// coefficient doubles round-trip exactly through JSON.
#[derive(Serialize, Deserialize)]
pub struct FrameCache {
    /// The potential config document (builtin expansions included).
    pub potential: serde_json::Value,
    pub grid: GridSpec,
    pub policy: TruncationPolicy,
    values: Vec<CachedLoop>,
    valid: Vec<bool>,
    pub max_residual: f64,
    pub off_big_cell: Vec<(usize, usize)>,
}

impl FrameCache {
    pub fn new(frame: &ExtendedFrame, potential: serde_json::Value) -> Self {
        FrameCache {
            potential,
            grid: frame.grid,
            policy: frame.policy,
            values: frame.values.iter().map(pack_loop).collect(),
            valid: frame.valid.clone(),
            max_residual: frame.max_residual,
            off_big_cell: frame.off_big_cell.clone(),
        }
    }

    pub fn into_frame(self) -> Result<(ExtendedFrame, serde_json::Value)> {
        if self.values.len() != self.grid.len() || self.valid.len() != self.grid.len() {
            return Err(Error::Schema {
                path: "values".into(),
                message: "frame cache length does not match its grid".into(),
            });
        }
        let frame = ExtendedFrame {
            grid: self.grid,
            policy: self.policy,
            values: self.values.iter().map(unpack_loop).collect(),
            valid: self.valid,
            max_residual: self.max_residual,
            off_big_cell: self.off_big_cell,
        };
        Ok((frame, self.potential))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
