#!/usr/bin/env python3

import colored
from emoji import emojize

class ColorProfile:
    '''Row and header styles for the terminal summary table. Infinite
    limits and replicate statuses may be swapped for emojis.
    '''

    def __init__(self,even_color,odd_color,header_color,
            header_bold=True,infinity_emoji=None,status_emojis=None):

        self.status_emojis = status_emojis

        self.even_style = colored.fg(even_color)
        self.odd_style = colored.fg(odd_color)

        self.header_style = colored.fg(header_color)
        if header_bold: self.header_style += colored.attr('bold')

        self.infinity_emoji = infinity_emoji

    def style_header(self,headers):
        return self.style_list(headers,self.header_style)

    def style_even(self,values):
        return self.style_list(values,self.even_style)

    def style_odd(self,values):
        return self.style_list(values,self.odd_style)

    def style_list(self, values, style):
        return [colored.stylize(v,style) for v in values]

    def mark(self, value):
        '''Replace `inf` and status values with the profile's emojis.
        '''

        if self.infinity_emoji and value in ('inf','-inf'):
            return value.replace('inf',self.infinity_emoji)

        if self.status_emojis:
            if value == 'ok': return self.status_emojis[0]
            if value.startswith('failed'): return self.status_emojis[1]

        return value

ColorProfiles = {
    'disable':None,
    'default':ColorProfile(even_color=254, odd_color=244,
            header_color=254, header_bold=True),
    'cobalt':ColorProfile(even_color=245, odd_color=26,
            header_color=245, header_bold=True),
    'forest':ColorProfile(even_color=28, odd_color=118,
            header_color=28, header_bold=True),
    'ember':ColorProfile(even_color=166, odd_color=179,
            header_color=166, header_bold=True),
    'symbols':ColorProfile(even_color=254, odd_color=244,
            header_color=254, header_bold=True,
            infinity_emoji=emojize(':infinity:'),
            status_emojis=(emojize(':check_mark_button:'),
                emojize(':cross_mark:'))),
}
