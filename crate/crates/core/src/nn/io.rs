//! Network file format (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "UWBNAVNN"
//! version      u32      FORMAT_VERSION
//! kind         u32      1 = mlp, 2 = actor, 3 = critic
//! n_blocks     u32      number of dense stacks that follow
//! per block:   u32 n_layers, then per layer: u32 in, u32 out, u8 activation
//! parameters:  per block, per layer: in×out f64 weights (row-major), out f64 biases
//! ```
//!
//! Actors store `[trunk, head_v, head_omega]`, critics
//! `[state_branch, action_branch, trunk]`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ActorDims, AdamState, ActorNet, CriticDims, Dense, Mlp, NetError, TwoBranchCritic};

pub const MAGIC: [u8; 8] = *b"UWBNAVNN";
pub const FORMAT_VERSION: u32 = 1;

const MAX_LAYERS: u32 = 64;
const MAX_DIM: u32 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Mlp = 1,
    Actor = 2,
    Critic = 3,
}

impl NetKind {
    fn from_u32(v: u32) -> Option<Self> {
        Some(match v {
            1 => NetKind::Mlp,
            2 => NetKind::Actor,
            3 => NetKind::Critic,
            _ => return None,
        })
    }
}

fn corrupt(e: io::Error) -> NetError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        NetError::Corrupt("file is truncated".into())
    } else {
        NetError::Io(e)
    }
}

pub(crate) fn write_bundle<W: Write>(w: &mut W, kind: NetKind, nets: &[&Mlp]) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    for net in nets {
        w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
        for l in net.layers() {
            w.write_all(&(l.in_dim as u32).to_le_bytes())?;
            w.write_all(&(l.out_dim as u32).to_le_bytes())?;
            w.write_all(&[l.activation.tag()])?;
        }
    }
    for net in nets {
        for l in net.layers() {
            write_f64s(w, &l.weights)?;
            write_f64s(w, &l.bias)?;
        }
    }
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32, NetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(corrupt)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, NetError> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(corrupt)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn read_bundle<R: Read>(r: &mut R) -> Result<(NetKind, Vec<Mlp>), NetError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if magic != MAGIC {
        return Err(NetError::Corrupt("bad magic bytes".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(NetError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = NetKind::from_u32(read_u32(r)?).ok_or_else(|| NetError::Corrupt("unknown network kind".into()))?;
    let n_blocks = read_u32(r)?;
    if n_blocks == 0 || n_blocks > 16 {
        return Err(NetError::Corrupt(format!("implausible block count {n_blocks}")));
    }
    let mut shapes = Vec::with_capacity(n_blocks as usize);
    for _ in 0..n_blocks {
        let n_layers = read_u32(r)?;
        if n_layers == 0 || n_layers > MAX_LAYERS {
            return Err(NetError::Corrupt(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers as usize);
        for _ in 0..n_layers {
            let i = read_u32(r)?;
            let o = read_u32(r)?;
            if i == 0 || o == 0 || i > MAX_DIM || o > MAX_DIM {
                return Err(NetError::Corrupt(format!("implausible layer shape {i}x{o}")));
            }
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag).map_err(corrupt)?;
            let act = Activation::from_tag(tag[0]).ok_or_else(|| NetError::Corrupt("unknown activation".into()))?;
            layers.push((i as usize, o as usize, act));
        }
        shapes.push(layers);
    }
    let mut nets = Vec::with_capacity(shapes.len());
    for layers in shapes {
        let mut dense = Vec::with_capacity(layers.len());
        for (in_dim, out_dim, activation) in layers {
            let weights = read_f64s(r, in_dim * out_dim)?;
            let bias = read_f64s(r, out_dim)?;
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(NetError::Corrupt("non-finite parameter".into()));
            }
            dense.push(Dense {
                in_dim,
                out_dim,
                weights,
                bias,
                activation,
            });
        }
        nets.push(Mlp::from_layers(dense).map_err(|e| NetError::Corrupt(e.to_string()))?);
    }
    Ok((kind, nets))
}

fn read_complete(path: &Path) -> Result<(NetKind, Vec<Mlp>), NetError> {
    let mut r = BufReader::new(File::open(path)?);
    let bundle = read_bundle(&mut r)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(NetError::Corrupt("trailing bytes after parameters".into()));
    }
    Ok(bundle)
}

fn write_file(path: &Path, kind: NetKind, nets: &[&Mlp]) -> Result<(), NetError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bundle(&mut w, kind, nets)?;
    w.flush()?;
    Ok(())
}

fn expect_kind(found: NetKind, expected: NetKind) -> Result<(), NetError> {
    if found != expected {
        return Err(NetError::Architecture(format!("file holds a {found:?} network, expected {expected:?}")));
    }
    Ok(())
}

pub fn save_net(net: &Mlp, path: impl AsRef<Path>) -> Result<(), NetError> {
    write_file(path.as_ref(), NetKind::Mlp, &[net])
}

pub fn load_net(path: impl AsRef<Path>) -> Result<Mlp, NetError> {
    let (kind, mut nets) = read_complete(path.as_ref())?;
    expect_kind(kind, NetKind::Mlp)?;
    if nets.len() != 1 {
        return Err(NetError::Architecture("plain network files hold one stack".into()));
    }
    Ok(nets.remove(0))
}

pub(crate) fn actor_from_blocks(kind: NetKind, nets: Vec<Mlp>) -> Result<ActorNet, NetError> {
    expect_kind(kind, NetKind::Actor)?;
    let [trunk, v, w]: [Mlp; 3] = nets
        .try_into()
        .map_err(|_| NetError::Architecture("actor files hold three stacks".into()))?;
    ActorNet::from_parts(trunk, v, w)
}

pub(crate) fn critic_from_blocks(kind: NetKind, nets: Vec<Mlp>) -> Result<TwoBranchCritic, NetError> {
    expect_kind(kind, NetKind::Critic)?;
    let [s, a, t]: [Mlp; 3] = nets
        .try_into()
        .map_err(|_| NetError::Architecture("critic files hold three stacks".into()))?;
    TwoBranchCritic::from_parts(s, a, t)
}

pub fn save_actor(actor: &ActorNet, path: impl AsRef<Path>) -> Result<(), NetError> {
    write_file(
        path.as_ref(),
        NetKind::Actor,
        &[&actor.trunk, &actor.head_v, &actor.head_omega],
    )
}

pub fn load_actor(path: impl AsRef<Path>) -> Result<ActorNet, NetError> {
    let (kind, nets) = read_complete(path.as_ref())?;
    actor_from_blocks(kind, nets)
}

/// Loads an actor and checks it has exactly the `expected` layer sizes.
pub fn load_actor_expecting(path: impl AsRef<Path>, expected: &ActorDims) -> Result<ActorNet, NetError> {
    let actor = load_actor(path)?;
    if &actor.dims() != expected {
        return Err(NetError::Architecture(format!(
            "actor has dims {:?}, expected {:?}",
            actor.dims(),
            expected
        )));
    }
    Ok(actor)
}

pub fn save_critic(critic: &TwoBranchCritic, path: impl AsRef<Path>) -> Result<(), NetError> {
    write_file(
        path.as_ref(),
        NetKind::Critic,
        &[&critic.state_branch, &critic.action_branch, &critic.trunk],
    )
}

pub fn load_critic(path: impl AsRef<Path>) -> Result<TwoBranchCritic, NetError> {
    let (kind, nets) = read_complete(path.as_ref())?;
    critic_from_blocks(kind, nets)
}

pub fn load_critic_expecting(path: impl AsRef<Path>, expected: &CriticDims) -> Result<TwoBranchCritic, NetError> {
    let critic = load_critic(path)?;
    if &critic.dims() != expected {
        return Err(NetError::Architecture(format!(
            "critic has dims {:?}, expected {:?}",
            critic.dims(),
            expected
        )));
    }
    Ok(critic)
}

const ADAM_MAGIC: [u8; 8] = *b"UWBNAVAD";

/// Optimizer state: magic "UWBNAVAD", version, u64 step, u32 tensor count,
/// u32 length per tensor, then all first moments and all second moments.
pub fn save_adam(state: &AdamState, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    let (m, v) = state.moments();
    w.write_all(&ADAM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&state.step.to_le_bytes())?;
    w.write_all(&(m.len() as u32).to_le_bytes())?;
    for t in m {
        w.write_all(&(t.len() as u32).to_le_bytes())?;
    }
    for t in m.iter().chain(v) {
        write_f64s(&mut w, t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_adam(path: impl AsRef<Path>) -> Result<AdamState, NetError> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if magic != ADAM_MAGIC {
        return Err(NetError::Corrupt("bad magic bytes".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(NetError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut step = [0u8; 8];
    r.read_exact(&mut step).map_err(corrupt)?;
    let n = read_u32(&mut r)?;
    if n > 4 * MAX_LAYERS {
        return Err(NetError::Corrupt(format!("implausible tensor count {n}")));
    }
    let lens = (0..n).map(|_| read_u32(&mut r)).collect::<Result<Vec<_>, _>>()?;
    if lens.iter().any(|&l| l > 1 << 28) {
        return Err(NetError::Corrupt("implausible tensor length".into()));
    }
    let read_all = |r: &mut BufReader<File>| {
        lens.iter()
            .map(|&l| read_f64s(r, l as usize))
            .collect::<Result<Vec<_>, _>>()
    };
    let m = read_all(&mut r)?;
    let v = read_all(&mut r)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(NetError::Corrupt("trailing bytes after parameters".into()));
    }
    Ok(AdamState::from_parts(u64::from_le_bytes(step), m, v))
}
