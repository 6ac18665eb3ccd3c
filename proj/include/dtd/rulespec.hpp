#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dtd/network.hpp"
#include "dtd/relevance.hpp"

// Textual rule-assignment syntax used by the command line: comma-separated
// tokens `name[:selector][=params]`.
//   name:      w2 | z | zplus | zplus+bias | zbox | zbox+bias | alphabeta | epsilon
//   selector:  first | rest | all (default) | <detection layer index>
//   params:    zbox=l:h, alphabeta=alpha:beta, epsilon=value
// Example: "zbox:first=-0.5:1.5,zplus:rest". A zbox with no params on the
// first layer takes the network's pixel bounds.

namespace dtd {

class RuleSpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input widths of each detection layer, in network order.
std::vector<std::size_t> detection_input_sizes(const Network& net);

// Every detection layer must end up with a rule; throws RuleSpecError
// otherwise or on any malformed token.
RuleAssignment parse_rule_spec(const std::string& spec, const Network& net);

}  // namespace dtd
