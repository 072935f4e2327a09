#include <sstream>

#include "duct/mil.hpp"

namespace duct {

std::string print_program(const Program& program) {
  std::ostringstream out;
  for (std::size_t c = 0; c < program.classes.size(); ++c) {
    const auto& cls = program.classes[c];
    if (c > 0) out << '\n';
    out << ".class " << cls.name;
    if (cls.parent) out << " : " << program.klass(*cls.parent).name;
    out << '\n';
    for (FieldId f : cls.fields) out << "  .field " << program.field(f).name << '\n';
    for (MethodId id : cls.methods) {
      const auto& m = program.method(id);
      out << "  .method ";
      if (m.virtual_flag) out << "virtual ";
      if (m.override_flag) out << "override ";
      out << m.name << '(';
      for (std::size_t p = 0; p < m.params.size(); ++p) {
        if (p > 0) out << ", ";
        if (m.params[p].byref) out << "ref ";
        out << m.params[p].name;
      }
      out << ')';
      if (m.returns_value) out << " returns";
      out << '\n';
      if (!m.locals.empty()) {
        out << "    .locals ";
        for (std::size_t l = 0; l < m.locals.size(); ++l) {
          if (l > 0) out << ", ";
          out << m.locals[l];
        }
        out << '\n';
      }
      std::optional<SourceLoc> last;
      for (std::size_t k = 0; k < m.body.size(); ++k) {
        if (!last || *last != m.line_map[k]) {
          last = m.line_map[k];
          out << "    .line " << program.source_files[last->file] << ':' << last->line << '\n';
        }
        const auto& ins = m.body[k];
        out << "    " << opcode_name(ins.op);
        if (!ins.operand.empty()) out << ' ' << ins.operand;
        out << '\n';
      }
      out << "  .end\n";
    }
    out << ".end\n";
  }
  return out.str();
}

}  // namespace duct
