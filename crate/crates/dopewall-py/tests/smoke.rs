//! Runs python/smoke_test.py against the module in an embedded interpreter.

use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn python_smoke_script_passes() {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(dopewall_py::dopewall_py)(py);
        py.import("sys").unwrap().getattr("modules").unwrap().set_item("dopewall", module).unwrap();
        // Check lines carry non-ASCII symbols; the embedded default is ASCII.
        py.run(c"import sys; sys.stdout.reconfigure(encoding='utf-8')", None, None).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("__name__", "__main__").unwrap();
        let code = CString::new(include_str!("../python/smoke_test.py")).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("smoke script failed");
        }
    });
}
