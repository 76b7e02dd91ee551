pub mod geweke;
