//! Scope checks run when source is compiled into a method.
//!
//! Weaving skips this pass: a method that is being instrumented has already
//! been compiled once, so its tree is known to be well formed.

use std::rc::Rc;

use crate::ast::{Node, NodeKind};
use crate::parser::SyntaxError;
use crate::symbol::Sym;

const PSEUDO_VARIABLES: [&str; 5] = ["self", "super", "true", "false", "nil"];

struct Scope {
    names: Vec<Sym>,
    /// Parameters are read-only.
    params: usize,
}

/// Checks a method (or a top-level sequence, with `slots` empty) for
/// duplicate declarations and stores into read-only names.
pub fn check_method(root: &Rc<Node>, slots: &[Sym]) -> Result<(), SyntaxError> {
    let mut scopes = Vec::new();
    check(root, slots, &mut scopes)
}

fn declare(scope: &mut Scope, name: Sym, slots: &[Sym], node: &Node, outer: &[Scope]) -> Result<(), SyntaxError> {
    let clash = scope.names.contains(&name)
        || slots.contains(&name)
        || outer.iter().any(|s| s.names.contains(&name))
        || PSEUDO_VARIABLES.contains(&name.as_str());
    if clash {
        return Err(SyntaxError { span: node.span, message: format!("name '{name}' is already defined") });
    }
    scope.names.push(name);
    Ok(())
}

fn check(node: &Rc<Node>, slots: &[Sym], scopes: &mut Vec<Scope>) -> Result<(), SyntaxError> {
    match &node.kind {
        NodeKind::MethodDef { params, temps, body, .. } | NodeKind::Block { params, temps, body } => {
            let mut scope = Scope { names: Vec::new(), params: params.len() };
            for &p in params {
                declare(&mut scope, p, slots, node, scopes)?;
            }
            for t in temps {
                let name = t.var_name().expect("temp declaration has a name");
                declare(&mut scope, name, slots, t, scopes)?;
            }
            scopes.push(scope);
            let result = check(body, slots, scopes);
            scopes.pop();
            result
        }
        NodeKind::Assignment { name, value } => {
            if PSEUDO_VARIABLES.contains(&name.as_str()) {
                return Err(SyntaxError { span: node.span, message: format!("cannot store into '{name}'") });
            }
            for scope in scopes.iter().rev() {
                if let Some(pos) = scope.names.iter().position(|n| n == name) {
                    if pos < scope.params {
                        return Err(SyntaxError {
                            span: node.span,
                            message: format!("cannot store into argument '{name}'"),
                        });
                    }
                    break;
                }
            }
            check(value, slots, scopes)
        }
        _ => {
            for child in node.children() {
                check(child, slots, scopes)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn first_method(src: &str) -> Rc<Node> {
        let program = parse(src).unwrap();
        let NodeKind::ClassDef { methods, .. } = &program.classes[0].kind else { panic!() };
        methods[0].clone()
    }

    #[test]
    fn accepts_well_formed_method() {
        let m = first_method("class A [ |s| m: a [ |t| t := a. s := t. ^[:b | b + t] ] ]");
        assert!(check_method(&m, &[Sym::new("s")]).is_ok());
    }

    #[test]
    fn rejects_store_into_argument() {
        let m = first_method("class A [ m: a [ a := 1 ] ]");
        assert!(check_method(&m, &[]).unwrap_err().message.contains("argument"));
    }

    #[test]
    fn rejects_shadowed_slot() {
        let m = first_method("class A [ |s| m [ |s| ^s ] ]");
        assert!(check_method(&m, &[Sym::new("s")]).is_err());
    }

    #[test]
    fn rejects_store_into_self() {
        let m = first_method("class A [ m [ self := 3 ] ]");
        assert!(check_method(&m, &[]).is_err());
    }
}
