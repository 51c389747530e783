#include "pdnf/config.hpp"

namespace pdnf {

bool terminated(const Config& c) { return c.pol == Pol::Opp && c.cont.k == Cont::Top; }

TypeP value_type(const E& v, const StoreTyping& lam) {
  switch (v->kind) {
    case Kind::Const:
      return v->ck == ConstKind::Int ? t_int() : v->ck == ConstKind::Bool ? t_bool() : t_unit();
    case Kind::Abs:
    case Kind::Sym:
    case Kind::Hole:
    case Kind::Lam:
      if (!v->type) throw TypeError("value without type annotation");
      return v->type;
    case Kind::Tuple: {
      std::vector<TypeP> ts;
      for (auto& k : v->kids) ts.push_back(value_type(k, lam));
      return t_product(std::move(ts));
    }
    default: break;
  }
  return typecheck(v, {}, lam);
}

StoreTyping store_typing(const Store& s) {
  StoreTyping lam;
  for (auto& [l, v] : s) lam[l] = value_type(v, {});
  return lam;
}

}  // namespace pdnf
