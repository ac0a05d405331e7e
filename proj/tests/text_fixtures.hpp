#pragma once

#include <string_view>

namespace fixture {

// Paragraph with punctuation around an embedded link.
inline constexpr std::string_view kListViewParagraph =
    "The ListView in CommonControls 6 (XP or newer) supports double buffering. Fortunately, .NET wraps the newest "
    "CommonControls on the system. To enable double buffering, send the appropriate Windows message to the ListView "
    "control:\n\nHere are the details:\nhttp://www.codeproject.com/KB/list/listviewxp.aspx";

inline constexpr std::string_view kListViewStripped =
    "The ListView in CommonControls 6 XP or newer supports double buffering Fortunately NET wraps the newest "
    "CommonControls on the system To enable double buffering send the appropriate Windows message to the ListView "
    "control\n\nHere are the details\nhttp://www.codeproject.com/KB/list/listviewxp.aspx";

inline constexpr std::string_view kListViewUrl = "http://www.codeproject.com/KB/list/listviewxp.aspx";

// Ruby snippet with a shebang, an indented =begin/=end block, string
// interpolation and trailing line comments.
inline constexpr std::string_view kRubyBefore =
    "#!/usr/bin/env ruby\n\nclass Foo\n  =begin\n  def call(*args)\n    puts \"received call with #{args.join(' ')}\"\n"
    "  end\n  =end\n\n  def method_missing(m, *args, &block)\n    puts \"received method_missing on "
    "'#{m}(#{args.join(' ')})'\"\n  end\nend\n\nf = Foo.new\nf.call('hi') # Not a syntax error! method_missing with m "
    "of :call\nf.send :'', 'ham' # method_missing with m set to :''\nf.send nil, 'bye' # raises an error\n";

inline constexpr std::string_view kRubyAfter =
    "#!/usr/bin/env ruby\n\nclass Foo\n\n  def method_missing(m, *args, &block)\n    puts \"received method_missing on "
    "'#{m}(#{args.join(' ')})'\"\n  end\nend\n\nf = Foo.new\nf.call('hi')\nf.send :'', 'ham'\nf.send nil, 'bye'\n";

}  // namespace fixture
