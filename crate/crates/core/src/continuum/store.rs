//! On-disk oracle: `FERMATGO`, u64 header length, header JSON, then
//! little-endian CSR arrays (node lattice indices, row offsets, targets,
//! weights).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Beta, GridOracle, NO_NODE};
use crate::error::{Error, Result};
use crate::sampler::{DensitySpec, DomainSpec};

const MAGIC: &[u8; 8] = b"FERMATGO";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    domain: DomainSpec,
    density: String,
    density_spec: Option<DensitySpec>,
    beta: Beta,
    h: f64,
    r: usize,
    lo: Vec<f64>,
    shape: Vec<usize>,
    nodes: u64,
    edges: u64,
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_vec<T, const N: usize>(r: &mut impl Read, len: usize, conv: fn([u8; N]) -> T) -> Result<Vec<T>> {
    let mut buf = vec![0u8; len.checked_mul(N).ok_or_else(|| Error::Format("array too large".into()))?];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(N).map(|c| conv(c.try_into().unwrap())).collect())
}

impl GridOracle {
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            version: 1,
            domain: self.domain.clone(),
            density: self.density_name.clone(),
            density_spec: self.density_spec.clone(),
            beta: self.beta,
            h: self.h,
            r: self.r,
            lo: self.lo.clone(),
            shape: self.shape.clone(),
            nodes: self.cell_of_node.len() as u64,
            edges: self.targets.len() as u64,
        };
        let json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for &c in &self.cell_of_node {
            w.write_all(&c.to_le_bytes())?;
        }
        for &o in &self.offsets {
            w.write_all(&o.to_le_bytes())?;
        }
        for &t in &self.targets {
            w.write_all(&t.to_le_bytes())?;
        }
        for &x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a grid oracle file".into()));
        }
        let len = read_u64(&mut r)? as usize;
        if len > 1 << 24 {
            return Err(Error::Format("oracle header too large".into()));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let h: Header = serde_json::from_slice(&json)?;
        if h.version != 1 || h.shape.len() != h.lo.len() || h.shape.is_empty() {
            return Err(Error::Format("unsupported oracle header".into()));
        }
        let cells = h
            .shape
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .filter(|&c| c < NO_NODE as usize)
            .ok_or_else(|| Error::Format("lattice too large".into()))?;
        let nodes = h.nodes as usize;
        let edges = h.edges as usize;
        if nodes > cells {
            return Err(Error::Format("more nodes than lattice cells".into()));
        }
        let cell_of_node = read_vec(&mut r, nodes, u32::from_le_bytes)?;
        let offsets = read_vec(&mut r, nodes + 1, u64::from_le_bytes)?;
        let targets = read_vec(&mut r, edges, u32::from_le_bytes)?;
        let weights = read_vec(&mut r, edges, f64::from_le_bytes)?;
        if offsets[0] != 0
            || offsets[nodes] != edges as u64
            || offsets.windows(2).any(|w| w[0] > w[1])
            || targets.iter().any(|&t| t as usize >= nodes)
            || cell_of_node.iter().any(|&c| c as usize >= cells)
        {
            return Err(Error::Format("corrupt oracle adjacency".into()));
        }
        let mut node_of_cell = vec![NO_NODE; cells];
        for (v, &c) in cell_of_node.iter().enumerate() {
            node_of_cell[c as usize] = v as u32;
        }
        Ok(Self {
            domain: h.domain,
            density_name: h.density,
            density_spec: h.density_spec,
            beta: h.beta,
            h: h.h,
            r: h.r,
            lo: h.lo,
            shape: h.shape,
            node_of_cell,
            cell_of_node,
            offsets,
            targets,
            weights,
        })
    }
}
