//! Expression trees for radial profiles and their 2-jet evaluation.

use std::fmt;

use super::jet::Jet2;
use super::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Atan,
}

impl UnaryOp {
    /// Named functions accepted by the grammar (everything except `Neg`).
    pub const FUNCTIONS: [UnaryOp; 7] = [
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tanh,
        UnaryOp::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::FUNCTIONS.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Nonnegative finite literal; negation is always an explicit `Unary(Neg, ..)`.
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    /// Power with a literal exponent.
    Pow(Box<Node>, f64),
}

/// A parsed radial profile expression in the single variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileExpr {
    root: Node,
}

impl Node {
    /// Builds a constant node, folding the sign of negative values into `Neg`.
    pub fn constant(c: f64) -> Node {
        if c.is_sign_negative() && c != 0.0 {
            Node::Unary(UnaryOp::Neg, Box::new(Node::Const(-c)))
        } else {
            Node::Const(c.abs())
        }
    }

    pub fn unary(op: UnaryOp, arg: Node) -> Node {
        Node::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn pow(base: Node, exponent: f64) -> Node {
        Node::Pow(Box::new(base), exponent)
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var => 1,
            Node::Unary(_, a) | Node::Pow(a, _) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Replaces every occurrence of `t` by `with`.
    pub fn substitute(&self, with: &Node) -> Node {
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Var => with.clone(),
            Node::Unary(op, a) => Node::unary(*op, a.substitute(with)),
            Node::Binary(op, a, b) => Node::binary(*op, a.substitute(with), b.substitute(with)),
            Node::Pow(a, p) => Node::pow(a.substitute(with), *p),
        }
    }

    fn eval(&self, t: f64) -> Result<Jet2, ProfileError> {
        let out = match self {
            Node::Const(c) => Jet2::constant(*c),
            Node::Var => Jet2::variable(t),
            Node::Unary(op, arg) => {
                let a = arg.eval(t)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => {
                        if a.v <= 0.0 {
                            return Err(domain(t, "log of nonpositive value", a.v));
                        }
                        a.ln()
                    }
                    UnaryOp::Sqrt => {
                        if a.v <= 0.0 {
                            return Err(domain(t, "sqrt of nonpositive value", a.v));
                        }
                        a.sqrt()
                    }
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Tanh => a.tanh(),
                    UnaryOp::Atan => a.atan(),
                }
            }
            Node::Binary(op, l, r) => {
                let a = l.eval(t)?;
                let b = r.eval(t)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b.v == 0.0 {
                            return Err(domain(t, "division by zero", b.v));
                        }
                        a / b
                    }
                }
            }
            Node::Pow(base, p) => {
                let a = base.eval(t)?;
                if a.v < 0.0 && p.fract() != 0.0 {
                    return Err(domain(t, "fractional power of negative value", a.v));
                }
                if a.v == 0.0 && p.fract() != 0.0 && *p < 2.0 {
                    return Err(domain(t, "power not differentiable at zero", a.v));
                }
                a.powf(*p)
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(domain(t, "non-finite result", out.v))
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var => f.write_str("t"),
            Node::Unary(UnaryOp::Neg, a) => {
                f.write_str("(-")?;
                a.write(f)?;
                f.write_str(")")
            }
            Node::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write(f)?;
                f.write_str(")")
            }
            Node::Binary(op, a, b) => {
                f.write_str("(")?;
                a.write(f)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f)?;
                f.write_str(")")
            }
            Node::Pow(a, p) => {
                f.write_str("(")?;
                a.write(f)?;
                write!(f, ")^{p}")
            }
        }
    }
}

fn domain(t: f64, what: &'static str, value: f64) -> ProfileError {
    ProfileError::Domain { t, what, value }
}

impl ProfileExpr {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluates `(φ(t), φ'(t), φ''(t))`.
    pub fn eval_jet2(&self, t: f64) -> Result<Jet2, ProfileError> {
        self.root.eval(t)
    }

    /// The rescaled profile `c·φ(t/c)`, i.e. the metric `c²g`.
    pub fn rescaled(&self, c: f64) -> ProfileExpr {
        let inner = Node::binary(BinaryOp::Div, Node::Var, Node::constant(c));
        ProfileExpr::new(Node::binary(
            BinaryOp::Mul,
            Node::constant(c),
            self.root.substitute(&inner),
        ))
    }

    /// Canonical, fully parenthesised source that parses back to the same tree.
    pub fn unparse(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}
