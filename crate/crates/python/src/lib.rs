//! Python bindings: planes, model banks, encode/decode, metrics and
//! architecture inspection.

use loopcodec::codec::{self, CodecConfig, Frame, ModelSet};
use loopcodec::eval;
use loopcodec::nn::{graph_from_tag, NetworkGraph, Op, ParamConvention};
use loopcodec::Error;
use pyo3::exceptions::{PyIOError, PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::MissingModel { .. } => PyKeyError::new_err(e.to_string()),
        Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// 8-bit sample plane.
#[pyclass(name = "Plane", module = "loopcodec_py", from_py_object)]
#[derive(Clone)]
struct PyPlane {
    inner: codec::Plane,
}

#[pymethods]
impl PyPlane {
    #[new]
    fn new(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: codec::Plane::new(width, height, data).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_pgm(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: codec::read_pgm(path).map_err(to_py)?,
        })
    }

    fn write_pgm(&self, path: &str) -> PyResult<()> {
        codec::write_pgm(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.samples())
    }

    fn get(&self, x: usize, y: usize) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err(format!("({x}, {y}) is outside the plane")));
        }
        Ok(self.inner.get(x, y))
    }

    /// PSNR in dB; `inf` for identical planes.
    fn psnr(&self, other: &PyPlane) -> PyResult<f64> {
        eval::psnr(&self.inner, &other.inner).map_err(to_py)
    }

    fn __eq__(&self, other: &PyPlane) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Plane({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Filter bank and intra predictor shared by encoder and decoder.
#[pyclass(name = "ModelSet", module = "loopcodec_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModelSet {
    inner: ModelSet,
}

#[pymethods]
impl PyModelSet {
    #[new]
    #[pyo3(signature = (id = 0))]
    fn new(id: u8) -> Self {
        Self {
            inner: ModelSet::empty(id),
        }
    }

    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelSet::load_dir(dir).map_err(to_py)?,
        })
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        self.inner.save_dir(dir).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> u8 {
        self.inner.id
    }

    #[getter]
    fn has_filter(&self) -> bool {
        self.inner.filter.is_some()
    }

    #[getter]
    fn has_predictor(&self) -> bool {
        self.inner.predictor.is_some()
    }

    /// Trained QP of each filter band.
    fn filter_qps(&self) -> Vec<u8> {
        self.inner
            .filter
            .as_ref()
            .map(|b| b.bands().iter().map(|band| band.trained_qp).collect())
            .unwrap_or_default()
    }

    /// Runs the filter chosen for `qp` on a square block.
    fn filter_block(&self, qp: u8, block: Vec<u8>) -> PyResult<Vec<u8>> {
        let n = (block.len() as f64).sqrt() as usize;
        if n * n != block.len() || n == 0 {
            return Err(PyValueError::new_err("block must be square"));
        }
        let model = self.inner.filter_model(qp).map_err(to_py)?;
        codec::filter_block(&model, &block, n).map_err(to_py)
    }
}

#[pyclass(name = "Encoded", module = "loopcodec_py")]
struct PyEncoded {
    #[pyo3(get)]
    payload_bits: u64,
    #[pyo3(get)]
    bpp: f64,
    #[pyo3(get)]
    neural_blocks: usize,
    bytes: Vec<u8>,
    recon: Vec<PyPlane>,
}

#[pymethods]
impl PyEncoded {
    fn bitstream<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.bytes)
    }

    /// Encoder-side reconstruction, one plane per component.
    fn recon(&self) -> Vec<PyPlane> {
        self.recon.clone()
    }
}

fn wrap_frame(f: Frame) -> Vec<PyPlane> {
    let mut out = vec![PyPlane { inner: f.y }];
    if let Some([u, v]) = f.chroma {
        out.push(PyPlane { inner: u });
        out.push(PyPlane { inner: v });
    }
    out
}

/// Encodes a luma plane, or Y/U/V planes when `chroma` is given.
#[pyfunction]
#[pyo3(signature = (plane, qp, filter = false, neural = false, models = None, chroma = None))]
fn encode(
    plane: &PyPlane,
    qp: u8,
    filter: bool,
    neural: bool,
    models: Option<&PyModelSet>,
    chroma: Option<(PyPlane, PyPlane)>,
) -> PyResult<PyEncoded> {
    let frame = match chroma {
        None => Frame::monochrome(plane.inner.clone()),
        Some((u, v)) => Frame::yuv420(plane.inner.clone(), u.inner, v.inner).map_err(to_py)?,
    };
    let empty = ModelSet::empty(0);
    let models = models.map(|m| &m.inner).unwrap_or(&empty);
    let cfg = CodecConfig::new(qp).with_filter(filter).with_neural(neural);
    let enc = codec::encode_frame(&frame, &cfg, models).map_err(to_py)?;
    Ok(PyEncoded {
        payload_bits: enc.payload_bits,
        bpp: eval::bits_per_pixel(enc.payload_bits, frame.width(), frame.height()),
        neural_blocks: enc.stats.neural,
        bytes: enc.bytes,
        recon: wrap_frame(enc.recon),
    })
}

/// Decodes every frame of a stream; each frame is a list of planes.
#[pyfunction]
#[pyo3(signature = (bitstream, models = None))]
fn decode(bitstream: &[u8], models: Option<&PyModelSet>) -> PyResult<Vec<Vec<PyPlane>>> {
    let empty = ModelSet::empty(0);
    let models = models.map(|m| &m.inner).unwrap_or(&empty);
    let frames = codec::decode_stream(bitstream, models).map_err(to_py)?;
    Ok(frames.into_iter().map(|d| wrap_frame(d.frame)).collect())
}

fn curve(points: Vec<(f64, f64)>) -> PyResult<eval::RdCurve> {
    eval::RdCurve::new(points.into_iter().map(|(r, p)| eval::RdPoint::new(r, p)).collect()).map_err(to_py)
}

/// BD-rate in percent from `(rate, psnr)` points.
#[pyfunction]
fn bd_rate(anchor: Vec<(f64, f64)>, test: Vec<(f64, f64)>) -> PyResult<f64> {
    eval::bd_rate(&curve(anchor)?, &curve(test)?).map_err(to_py)
}

/// BD-PSNR in dB from `(rate, psnr)` points.
#[pyfunction]
fn bd_psnr(anchor: Vec<(f64, f64)>, test: Vec<(f64, f64)>) -> PyResult<f64> {
    eval::bd_psnr(&curve(anchor)?, &curve(test)?).map_err(to_py)
}

/// Network architecture by tag (`inception12`, `vrcnn`, `arcnn`, `fc32k4h128-128`).
#[pyclass(name = "Architecture", module = "loopcodec_py")]
struct PyArchitecture {
    graph: NetworkGraph,
}

#[pymethods]
impl PyArchitecture {
    #[new]
    fn new(tag: &str) -> PyResult<Self> {
        Ok(Self {
            graph: graph_from_tag(tag).map_err(to_py)?,
        })
    }

    #[getter]
    fn tag(&self) -> String {
        self.graph.arch().to_string()
    }

    #[pyo3(signature = (with_bias = true))]
    fn param_count(&self, with_bias: bool) -> usize {
        let conv = if with_bias {
            ParamConvention::WithBias
        } else {
            ParamConvention::WithoutBias
        };
        self.graph.count_parameters(conv)
    }

    /// `(id, kind, weight dims)` of every parameterized layer.
    fn layers(&self) -> Vec<(String, String, Vec<usize>)> {
        self.graph
            .param_nodes()
            .map(|n| {
                let kind = match n.op {
                    Op::FullyConnected { .. } => "fc",
                    _ => "conv",
                };
                (n.id.clone(), kind.to_string(), n.op.param_dims().unwrap().0)
            })
            .collect()
    }
}

#[pymodule]
fn loopcodec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlane>()?;
    m.add_class::<PyModelSet>()?;
    m.add_class::<PyEncoded>()?;
    m.add_class::<PyArchitecture>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(bd_rate, m)?)?;
    m.add_function(wrap_pyfunction!(bd_psnr, m)?)?;
    Ok(())
}
