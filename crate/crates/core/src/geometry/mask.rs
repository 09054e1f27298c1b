use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Binary occupancy grid over a rectangular window.
///
/// Cell `(i, j)` covers `origin + h·[i, i+1) × h·[j, j+1)`; set quantities
/// are evaluated at cell centers. Storage is row-major with row `j = 0` at
/// `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
    cells: Vec<bool>,
}

/// A grid window aligned with the global lattice `h·ℤ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub nx: usize,
    pub ny: usize,
    /// Global index of cell `(0, 0)`.
    pub gi0: i64,
    pub gj0: i64,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn union(&self, o: &Frame) -> Frame {
        let gi0 = self.gi0.min(o.gi0);
        let gj0 = self.gj0.min(o.gj0);
        let gi1 = (self.gi0 + self.nx as i64).max(o.gi0 + o.nx as i64);
        let gj1 = (self.gj0 + self.ny as i64).max(o.gj0 + o.ny as i64);
        Frame {
            nx: (gi1 - gi0) as usize,
            ny: (gj1 - gj0) as usize,
            gi0,
            gj0,
        }
    }

    pub fn pad(&self, cells: usize) -> Frame {
        Frame {
            nx: self.nx + 2 * cells,
            ny: self.ny + 2 * cells,
            gi0: self.gi0 - cells as i64,
            gj0: self.gj0 - cells as i64,
        }
    }
}

impl DomainMask {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("mask window must be nonempty".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing {h}")));
        }
        Ok(DomainMask {
            nx,
            ny,
            h,
            origin,
            cells: vec![false; nx * ny],
        })
    }

    /// Window aligned to the lattice: `origin = h·(gi0, gj0)`.
    pub fn aligned(frame: Frame, h: f64) -> Result<Self> {
        DomainMask::new(
            frame.nx,
            frame.ny,
            h,
            [frame.gi0 as f64 * h, frame.gj0 as f64 * h],
        )
    }

    /// Occupies every cell whose center satisfies `inside`.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        h: f64,
        origin: [f64; 2],
        inside: impl Fn([f64; 2]) -> bool,
    ) -> Result<Self> {
        let mut m = DomainMask::new(nx, ny, h, origin)?;
        for j in 0..ny {
            for i in 0..nx {
                let c = m.center(i, j);
                m.cells[j * nx + i] = inside(c);
            }
        }
        Ok(m)
    }

    /// Aligned window of half-width `half` (rounded up to whole cells)
    /// around `center`, filled with `inside`.
    pub fn around(
        center: [f64; 2],
        half: f64,
        h: f64,
        inside: impl Fn([f64; 2]) -> bool,
    ) -> Result<Self> {
        let gi0 = ((center[0] - half) / h).floor() as i64;
        let gj0 = ((center[1] - half) / h).floor() as i64;
        let gi1 = ((center[0] + half) / h).ceil() as i64;
        let gj1 = ((center[1] + half) / h).ceil() as i64;
        let frame = Frame {
            nx: (gi1 - gi0).max(1) as usize,
            ny: (gj1 - gj0).max(1) as usize,
            gi0,
            gj0,
        };
        let mut m = DomainMask::aligned(frame, h)?;
        m.fill(inside);
        Ok(m)
    }

    pub fn fill(&mut self, inside: impl Fn([f64; 2]) -> bool) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.center(i, j);
                self.cells[j * self.nx + i] = inside(c);
            }
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    /// Out-of-window cells read as unoccupied.
    pub fn get_signed(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.cells[j as usize * self.nx + i as usize]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[j * self.nx + i] = v;
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    /// `h² · (occupied count)`.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.h * self.h
    }

    /// Occupied cells with an unoccupied 4-neighbor (window edge counts as
    /// unoccupied).
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        if !self.get(i, j) {
            return false;
        }
        let (i, j) = (i as i64, j as i64);
        !(self.get_signed(i - 1, j)
            && self.get_signed(i + 1, j)
            && self.get_signed(i, j - 1)
            && self.get_signed(i, j + 1))
    }

    pub fn boundary_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.is_boundary(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn occupied_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Length of the staircase boundary (occupied/unoccupied faces × h).
    pub fn perimeter(&self) -> f64 {
        let mut faces = 0usize;
        for j in 0..self.ny as i64 {
            for i in 0..self.nx as i64 {
                if !self.get_signed(i, j) {
                    continue;
                }
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if !self.get_signed(i + di, j + dj) {
                        faces += 1;
                    }
                }
            }
        }
        faces as f64 * self.h
    }

    pub fn barycenter(&self) -> Option<[f64; 2]> {
        let mut s = [0.0, 0.0];
        let mut n = 0usize;
        for (i, j) in self.occupied_cells() {
            let c = self.center(i, j);
            s[0] += c[0];
            s[1] += c[1];
            n += 1;
        }
        (n > 0).then(|| [s[0] / n as f64, s[1] / n as f64])
    }

    /// Global lattice index of cell `(0, 0)`; fails when the origin is not
    /// a multiple of `h`.
    pub fn global_offset(&self) -> Result<(i64, i64)> {
        let fi = self.origin[0] / self.h;
        let fj = self.origin[1] / self.h;
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-6 || (fj - rj).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "window origin ({}, {}) is not on the h = {} lattice",
                self.origin[0], self.origin[1], self.h
            )));
        }
        Ok((ri as i64, rj as i64))
    }

    pub fn frame(&self) -> Result<Frame> {
        let (gi0, gj0) = self.global_offset()?;
        Ok(Frame {
            nx: self.nx,
            ny: self.ny,
            gi0,
            gj0,
        })
    }

    /// Occupancy of this mask inside another lattice-aligned frame.
    pub fn embed(&self, frame: &Frame) -> Result<Vec<bool>> {
        let own = self.frame()?;
        let mut out = vec![false; frame.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.get(i, j) {
                    continue;
                }
                let fi = own.gi0 + i as i64 - frame.gi0;
                let fj = own.gj0 + j as i64 - frame.gj0;
                if fi < 0 || fj < 0 || fi >= frame.nx as i64 || fj >= frame.ny as i64 {
                    return Err(Error::Window("occupied cell falls outside target frame".into()));
                }
                out[fj as usize * frame.nx + fi as usize] = true;
            }
        }
        Ok(out)
    }

    /// Copy of this mask placed in `frame` (which must contain every occupied cell).
    pub fn reframe(&self, frame: Frame) -> Result<DomainMask> {
        let cells = self.embed(&frame)?;
        let mut m = DomainMask::aligned(frame, self.h)?;
        m.cells = cells;
        Ok(m)
    }

    fn same_spacing(&self, o: &DomainMask) -> Result<()> {
        if ((self.h - o.h) / self.h).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "spacings differ: {} vs {}",
                self.h, o.h
            )));
        }
        Ok(())
    }

    /// Smallest frame holding both windows.
    pub fn common_frame(&self, o: &DomainMask) -> Result<Frame> {
        self.same_spacing(o)?;
        Ok(self.frame()?.union(&o.frame()?))
    }

    fn combine(&self, o: &DomainMask, f: impl Fn(bool, bool) -> bool) -> Result<DomainMask> {
        let frame = self.common_frame(o)?;
        let a = self.embed(&frame)?;
        let b = o.embed(&frame)?;
        let mut m = DomainMask::aligned(frame, self.h)?;
        for k in 0..frame.len() {
            m.cells[k] = f(a[k], b[k]);
        }
        Ok(m)
    }

    pub fn union(&self, o: &DomainMask) -> Result<DomainMask> {
        self.combine(o, |a, b| a || b)
    }

    pub fn intersection(&self, o: &DomainMask) -> Result<DomainMask> {
        self.combine(o, |a, b| a && b)
    }

    pub fn difference(&self, o: &DomainMask) -> Result<DomainMask> {
        self.combine(o, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, o: &DomainMask) -> Result<DomainMask> {
        self.combine(o, |a, b| a != b)
    }

    /// `|self Δ o|`.
    pub fn symmetric_difference_volume(&self, o: &DomainMask) -> Result<f64> {
        Ok(self.symmetric_difference(o)?.volume())
    }

    pub fn is_subset_of(&self, o: &DomainMask) -> Result<bool> {
        Ok(self.difference(o)?.is_empty())
    }

    /// One-cell 4-neighborhood dilation, clipped to the window.
    pub fn dilate(&self) -> DomainMask {
        let mut out = self.clone();
        for j in 0..self.ny as i64 {
            for i in 0..self.nx as i64 {
                if self.get_signed(i, j) {
                    continue;
                }
                if self.get_signed(i - 1, j)
                    || self.get_signed(i + 1, j)
                    || self.get_signed(i, j - 1)
                    || self.get_signed(i, j + 1)
                {
                    out.cells[j as usize * self.nx + i as usize] = true;
                }
            }
        }
        out
    }

    /// One-cell erosion: removes boundary cells.
    pub fn erode(&self) -> DomainMask {
        let mut out = self.clone();
        for (i, j) in self.boundary_cells() {
            out.cells[j * self.nx + i] = false;
        }
        out
    }

    /// Shifts occupancy by whole cells inside the same window. Cells pushed
    /// out of the window are an error.
    pub fn shifted(&self, di: i64, dj: i64) -> Result<DomainMask> {
        let mut out = self.clone();
        out.cells.iter_mut().for_each(|c| *c = false);
        for (i, j) in self.occupied_cells() {
            let ni = i as i64 + di;
            let nj = j as i64 + dj;
            if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                return Err(Error::Window("shift pushes cells out of the window".into()));
            }
            out.cells[nj as usize * self.nx + ni as usize] = true;
        }
        Ok(out)
    }

    /// Same occupancy with the whole window translated by whole cells.
    pub fn translated_window(&self, di: i64, dj: i64) -> DomainMask {
        let mut out = self.clone();
        out.origin = [
            self.origin[0] + di as f64 * self.h,
            self.origin[1] + dj as f64 * self.h,
        ];
        out
    }

    /// Dilation by `factor` about `about`, resampled by nearest cell into
    /// `frame` (same spacing).
    pub fn rescaled(&self, about: [f64; 2], factor: f64, frame: Frame) -> Result<DomainMask> {
        if !(factor > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {factor}")));
        }
        let mut out = DomainMask::aligned(frame, self.h)?;
        for j in 0..out.ny {
            for i in 0..out.nx {
                let c = out.center(i, j);
                let src = [
                    about[0] + (c[0] - about[0]) / factor,
                    about[1] + (c[1] - about[1]) / factor,
                ];
                let si = ((src[0] - self.origin[0]) / self.h).floor() as i64;
                let sj = ((src[1] - self.origin[1]) / self.h).floor() as i64;
                out.cells[j * out.nx + i] = self.get_signed(si, sj);
            }
        }
        Ok(out)
    }

    /// Connected components (4-connectivity) as separate masks in the same window.
    pub fn components(&self) -> Vec<DomainMask> {
        let mut label = vec![usize::MAX; self.cells.len()];
        let mut comps = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = self.clone();
            comp.cells.iter_mut().for_each(|c| *c = false);
            let mut stack = vec![start];
            label[start] = id;
            while let Some(p) = stack.pop() {
                comp.cells[p] = true;
                let (i, j) = ((p % self.nx) as i64, (p / self.nx) as i64);
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (ni, nj) = (i + di, j + dj);
                    if self.get_signed(ni, nj) {
                        let q = nj as usize * self.nx + ni as usize;
                        if label[q] == usize::MAX {
                            label[q] = id;
                            stack.push(q);
                        }
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// Serializes to the `FKMASK 1` text format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.nx + 1) * self.ny + 64);
        let _ = writeln!(
            s,
            "FKMASK 1 {} {} {} {} {}",
            self.nx, self.ny, self.h, self.origin[0], self.origin[1]
        );
        for j in 0..self.ny {
            for i in 0..self.nx {
                s.push(if self.get(i, j) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<DomainMask> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mask file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "FKMASK" || fields[1] != "1" {
            return Err(Error::Parse(format!("bad mask header: {header:?}")));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        };
        let nx = parse_usize(fields[2])?;
        let ny = parse_usize(fields[3])?;
        let h = parse_f64(fields[4])?;
        let origin = [parse_f64(fields[5])?, parse_f64(fields[6])?];
        let mut m = DomainMask::new(nx, ny, h, origin)?;
        for j in 0..ny {
            let row = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {j}")))?;
            if row.len() != nx {
                return Err(Error::Parse(format!(
                    "row {j} has {} characters, expected {nx}",
                    row.len()
                )));
            }
            for (i, ch) in row.bytes().enumerate() {
                m.cells[j * nx + i] = match ch {
                    b'0' => false,
                    b'1' => true,
                    other => {
                        return Err(Error::Parse(format!(
                            "row {j}: invalid character {:?}",
                            other as char
                        )))
                    }
                };
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Parse("trailing data after mask rows".into()));
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<DomainMask> {
        DomainMask::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(r: f64, h: f64) -> DomainMask {
        DomainMask::around([0.0, 0.0], r + 2.0 * h, h, |c| c[0].hypot(c[1]) < r).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let m = disk(0.7, 0.1);
        let back = DomainMask::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(m.to_text().starts_with("FKMASK 1 "));
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(DomainMask::from_text("FKMASK 2 1 1 0.1 0 0\n1\n").is_err());
        assert!(DomainMask::from_text("FKMASK 1 2 1 0.1 0 0\n1\n").is_err());
        assert!(DomainMask::from_text("FKMASK 1 1 1 0.1 0 0\n2\n").is_err());
    }

    #[test]
    fn morphology_and_sets() {
        let m = disk(1.0, 0.05);
        let d = m.dilate();
        let e = m.erode();
        assert!(m.is_subset_of(&d).unwrap());
        assert!(e.is_subset_of(&m).unwrap());
        assert!(d.count() > m.count() && e.count() < m.count());
        let ab = m.symmetric_difference_volume(&d).unwrap();
        let ba = d.symmetric_difference_volume(&m).unwrap();
        assert_eq!(ab, ba);
        assert!(!m.boundary_cells().is_empty());
    }

    #[test]
    fn components_split() {
        let h = 0.1;
        let m = DomainMask::around([0.0, 0.0], 3.0, h, |c| {
            (c[0] - 1.5).hypot(c[1]) < 0.6 || (c[0] + 1.5).hypot(c[1]) < 0.6
        })
        .unwrap();
        let comps = m.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].count() + comps[1].count(), m.count());
    }
}
