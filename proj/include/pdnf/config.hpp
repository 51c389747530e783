#pragma once

#include <map>
#include <set>
#include <string>

#include "pdnf/syntax.hpp"

namespace pdnf {

using Store = std::map<int, E>;  // location atom -> closed value
using Gamma = std::map<int, E>;  // index -> closed function value
using Names = std::map<int, TypeP>;  // abstract names with their types

enum class Pol { Prop, Opp, Bot };

struct Cont {
  enum K { Ctx, Top, Chi } k = Top;
  E ctx;  // evaluation context (contains a hole) when k == Ctx
  static Cont top() { return {}; }
  static Cont chi() { return {Chi, nullptr}; }
  static Cont of(E e) { return {Ctx, std::move(e)}; }
};

struct Config {
  Pol pol = Pol::Bot;
  Names A;
  Gamma gamma;
  Store store;
  E exp;      // Prop
  Cont cont;  // Opp
  int next_index = 0;  // highest index ever allocated; fresh index = next_index + 1

  static Config bot() { return {}; }
  static Config prop(E e) {
    Config c;
    c.pol = Pol::Prop;
    c.exp = std::move(e);
    return c;
  }
  bool is_bot() const { return pol == Pol::Bot; }
};

bool terminated(const Config& c);

// Store typing from store contents (location -> type); values must be typable
StoreTyping store_typing(const Store& s);

// Type of a closed value given a store typing
TypeP value_type(const E& v, const StoreTyping& lam);

}  // namespace pdnf
