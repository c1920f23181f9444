use crate::expr::{eval, Env, EvalError, Pos, Val};
use crate::model::InstanceModel;

use super::{GeneratedFile, GeneratedFileSet, Node, Template, TemplateError};

struct Output {
    set: GeneratedFileSet,
    current: Option<usize>,
}

impl Output {
    fn write(&mut self, text: &str) {
        match self.current {
            Some(i) => self.set.files[i].content.push_str(text),
            None => self.set.unfiled.push_str(text),
        }
    }
}

fn eval_error(e: EvalError) -> TemplateError {
    TemplateError::Eval {
        pos: e.pos,
        message: e.message,
    }
}

fn bad(pos: Pos, message: impl Into<String>) -> TemplateError {
    TemplateError::Eval {
        pos,
        message: message.into(),
    }
}

/// Renders `t` over `m`. Deterministic: equal inputs give identical output.
pub fn render(t: &Template, m: &InstanceModel) -> Result<GeneratedFileSet, TemplateError> {
    let mut env = Env::new();
    if let (Some(param), Some(class)) = (&t.param, &t.param_class) {
        if m.metamodel().class(class).is_none() {
            return Err(bad(Pos::start(), format!("entry class `{class}` is not in the metamodel")));
        }
        let mut roots = m.objects_of(class);
        let root = match (roots.next(), roots.next()) {
            (Some(root), None) => root,
            (None, _) => return Err(bad(Pos::start(), format!("model has no `{class}` object"))),
            (Some(_), Some(_)) => {
                return Err(bad(Pos::start(), format!("model has more than one `{class}` object")))
            }
        };
        env.push(param.clone(), Val::Obj(root));
    }
    let mut out = Output {
        set: GeneratedFileSet::default(),
        current: None,
    };
    render_nodes(&t.body, &mut env, m, &mut out)?;
    Ok(out.set)
}

fn render_nodes<'m>(
    nodes: &[Node],
    env: &mut Env<'m>,
    m: &'m InstanceModel,
    out: &mut Output,
) -> Result<(), TemplateError> {
    for node in nodes {
        match node {
            Node::Text(t) => out.write(t),
            Node::Comment(_) => {}
            Node::Interp { expr, pos } => {
                let v = eval(expr, env, m).map_err(eval_error)?;
                let text = v.render().map_err(|msg| bad(*pos, msg))?;
                out.write(&text);
            }
            Node::If {
                cond,
                then,
                otherwise,
                pos,
            } => match eval(cond, env, m).map_err(eval_error)? {
                Val::Bool(true) => render_nodes(then, env, m, out)?,
                Val::Bool(false) => render_nodes(otherwise, env, m, out)?,
                other => return Err(bad(*pos, format!("`[if]` condition is a {}, not Boolean", other.type_name()))),
            },
            Node::For {
                var,
                class,
                iter,
                body,
                pos,
            } => {
                let items = eval(iter, env, m).map_err(eval_error)?.into_items();
                for item in items {
                    if let Some(class) = class {
                        match &item {
                            Val::Obj(o) if o.class == *class => {}
                            Val::Obj(o) => {
                                return Err(bad(*pos, format!("`{}` is a `{}`, not a `{class}`", o.id, o.class)))
                            }
                            other => return Err(bad(*pos, format!("loop item is a {}, not a `{class}`", other.type_name()))),
                        }
                    }
                    env.push(var.clone(), item);
                    let result = render_nodes(body, env, m, out);
                    env.pop();
                    result?;
                }
            }
            Node::File {
                name,
                append,
                encoding,
                body,
                pos,
            } => {
                if !encoding.eq_ignore_ascii_case("UTF-8") {
                    return Err(bad(*pos, format!("unsupported encoding `{encoding}`")));
                }
                let name = match eval(name, env, m).map_err(eval_error)? {
                    Val::Str(s) if !s.is_empty() => s,
                    other => return Err(bad(*pos, format!("file name must be a non-empty String, got {other:?}"))),
                };
                let index = match out.set.files.iter().position(|f| f.name == name) {
                    Some(i) if *append => i,
                    Some(_) => return Err(TemplateError::DuplicateFile(name)),
                    None => {
                        out.set.files.push(GeneratedFile {
                            name,
                            content: String::new(),
                        });
                        out.set.files.len() - 1
                    }
                };
                let saved = out.current.replace(index);
                let result = render_nodes(body, env, m, out);
                out.current = saved;
                result?;
            }
        }
    }
    Ok(())
}
