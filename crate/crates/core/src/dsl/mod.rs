//! The loop language: IR, parser and canonical printer.

mod ast;
mod error;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use error::{ParseError, ParseErrorKind};
pub use parser::parse;
pub use printer::{print, print_expr, print_loop, print_ref, print_statement, print_sync};
