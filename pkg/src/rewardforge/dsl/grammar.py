"""The reward DSL grammar, published as EBNF.

GRAMMAR_EBNF is embedded verbatim into generation prompts and mirrored at
docs/dsl.ebnf (a test keeps the two in sync). Bump GRAMMAR_VERSION on any
syntax change.
"""

GRAMMAR_VERSION = 1

GRAMMAR_EBNF = """\
(* Reward program DSL, grammar v1.
   A program is a list of named scalar reward components followed by one
   weights line. The training reward of a step is the weighted sum of all
   component values. All values are double-precision reals; comparisons
   and logical operators evaluate to 1.0 or 0.0. *)

program       = { component , newline } , weights , [ newline ] ;
component     = name , "=" , expr ;
weights       = "weights:" , weight_entry , { "," , weight_entry } ;
weight_entry  = name , "=" , number ;

expr          = or_expr ;
or_expr       = and_expr , { "or" , and_expr } ;
and_expr      = not_expr , { "and" , not_expr } ;
not_expr      = "not" , not_expr | comparison ;
comparison    = additive , [ ( "<" | "<=" | ">" | ">=" | "==" ) , additive ] ;
additive      = term , { ( "+" | "-" ) , term } ;
term          = unary , { ( "*" | "/" ) , unary } ;
unary         = "-" , unary | atom ;
atom          = number | field_ref | call | "(" , expr , ")" ;

field_ref     = ( "cur" | "prev" | "course" ) , "." , name ;
call          = fn_name , "(" , expr , { "," , expr } , ")" ;
fn_name       = "abs" | "sqrt" | "exp" | "tanh" | "sign"     (* 1 argument  *)
              | "min" | "max"                                (* 2 arguments *)
              | "clip"                                       (* clip(x, lo, hi) *)
              | "if" ;                                       (* if(cond, a, b)  *)

name          = lowercase , { lowercase | digit | "_" } ;
number        = digit , { digit } , [ "." , { digit } ] , [ exponent ]
              | "." , digit , { digit } , [ exponent ] ;
exponent      = ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ;

(* "#" starts a comment that runs to the end of the line.
   Field references must name fields of the published observation/course
   schema; unknown fields are rejected at parse time.
   Resource bounds: expression depth <= 64, total nodes <= 4096. *)
"""
