use std::path::Path;

use crate::network::{ByteReader, DenseNet, NetError, TransformConfig};

const MAGIC: &[u8; 4] = b"IDGP";
const VERSION: u32 = 1;

/// Both trained networks plus what is needed to interpret their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub main: DenseNet,
    pub aux: DenseNet,
    pub transform: TransformConfig,
    pub ml_only: bool,
}

impl TrainedModel {
    /// Little-endian binary layout: magic, version, flags, transform, then
    /// the main and auxiliary networks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(u8::from(self.ml_only));
        for v in [self.transform.a, self.transform.b, self.transform.gamma] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        self.main.write_to(&mut out);
        self.aux.write_to(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(NetError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(NetError::Format(format!("unsupported version {version}")));
        }
        let ml_only = match r.u8()? {
            0 => false,
            1 => true,
            f => return Err(NetError::Format(format!("unknown flags {f}"))),
        };
        let transform = TransformConfig { a: r.f64()?, b: r.f64()?, gamma: r.f64()? };
        let main = DenseNet::read_from(&mut r)?;
        let aux = DenseNet::read_from(&mut r)?;
        if !r.is_empty() {
            return Err(NetError::Format("trailing bytes".into()));
        }
        transform.validate(main.clamp_bound()).map_err(|e| NetError::Format(e.to_string()))?;
        if aux.input_dim() != main.input_dim() || aux.output_dim() != 2 * main.output_dim() {
            return Err(NetError::Format("network shapes do not match".into()));
        }
        Ok(Self { main, aux, transform, ml_only })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let bytes = std::fs::read(path).map_err(|e| NetError::Format(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
